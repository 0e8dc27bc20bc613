"""Step-size controllers driven by the auxiliary-variable error indicator.

The indicator is ``e = |1 - xi|``. A step is rejected while ``e**m > tol`` and
retried with ``tau <- clamp(rho * (tol / e**m)**r * tau)``, where the clamp
bounds the step by ``tau_min`` below and ``tau_max / sqrt(1 + (gamma* E')^2)``
above. The hybrid controller runs order 3 up to a switch time and order 2 after.
"""

import logging
import math
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

E_FLOOR = 1e-16


@dataclass(frozen=True)
class OrderConfig:
    rho: float = 0.75
    tol: float = 1e-3
    r: float = 0.5
    m: float = 1.0
    tau_min: float = 1e-5
    tau_max: float = 1e-2
    gamma_star: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not self.tol > 0 or not self.r > 0:
            raise ValueError("tol and r must be positive")
        if not 0 < self.m <= 1:
            raise ValueError("m must lie in (0, 1]")
        if not 0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.gamma_star < 0:
            raise ValueError("gamma_star must be non-negative")


@dataclass
class AdaptiveConfig:
    orders: dict = field(default_factory=dict)
    t_switch: float = 0.0
    max_retries: int = 20

    def block(self, k):
        try:
            return self.orders[k]
        except KeyError:
            raise ValueError(f"no controller parameters for order {k}") from None


def a_dp(e, tau, cfg):
    """Proposed step ``rho * (tol / e)**r * tau`` for an indicator value ``e``."""
    return cfg.rho * (cfg.tol / e) ** cfg.r * tau


def step_cap(energy_rate, cfg):
    return cfg.tau_max / math.sqrt(1.0 + (cfg.gamma_star * energy_rate) ** 2)


def clamp_step(tau_prop, energy_rate, cfg):
    return max(cfg.tau_min, min(tau_prop, step_cap(energy_rate, cfg)))


def estimate_energy_rate(history):
    """Backward difference of ``E1`` over the last accepted step (0 with one level)."""
    if len(history) < 2:
        return 0.0
    a, b = history.levels[0], history.levels[1]
    return (a.e1 - b.e1) / (a.t - b.t)


def clip_step(tau, t, t_stop):
    """``tau`` limited so the step ends at ``t_stop``; near misses snap onto it."""
    if t_stop is None:
        return tau
    rem = t_stop - t
    if tau >= rem * (1.0 - 1e-9):
        return rem
    return tau


def indicator(outcome, cfg):
    return max(outcome.e, E_FLOOR) ** cfg.m


def _controlled_step(stepper, history, cfg, order_for, tau, t_stop):
    """Shared accept/reject loop; ``order_for(t_new)`` picks the scheme order."""
    e_rate = estimate_energy_rate(history)
    t = history.t
    retries = 0
    while True:
        for _ in range(2):
            # only the final step before t_stop may fall below tau_min
            trial = clip_step(tau, t, t_stop)
            k = order_for(t + trial)
            blk = cfg.block(k)
            if retries:
                break
            tau = clamp_step(tau, e_rate, blk)
        trial = clip_step(tau, t, t_stop)
        out = stepper.step(history, trial, min(k, len(history)))
        ind = indicator(out, blk)
        if ind <= blk.tol:
            break
        if trial <= blk.tau_min:
            # cannot shrink further; take it
            break
        if retries >= cfg.max_retries:
            log.warning("t=%.6g: %d rejections, accepting at tau_min", t, retries)
            trial = clip_step(blk.tau_min, t, t_stop)
            out = stepper.step(history, trial, min(k, len(history)))
            break
        tau = clamp_step(a_dp(ind, trial, blk), e_rate, blk)
        retries += 1
    out.retries = retries
    new_rate = (out.state.e1 - history.latest.e1) / out.tau
    tau_next = clamp_step(a_dp(indicator(out, blk), out.tau, blk), new_rate, blk)
    return out, tau_next, k


def adaptive_step(stepper, history, cfg, k, tau, t_stop=None):
    """Single-order controller; returns ``(outcome, tau_next)``.

    The history is not modified; the caller accepts ``outcome``. Orders above
    the number of stored levels are reduced while the history fills up.
    """
    out, tau_next, _ = _controlled_step(stepper, history, cfg, lambda _t: k, tau, t_stop)
    return out, tau_next


def hybrid_step(stepper, history, cfg, tau, t_stop=None):
    """Order 3 while ``t_{n+1} <= t_switch``, order 2 after; returns ``(outcome, tau_next, order)``."""
    tc = cfg.t_switch
    slack = 1e-12 * max(1.0, abs(tc))

    def order_for(t_new):
        return 3 if t_new <= tc + slack else 2

    out, tau_next, _ = _controlled_step(stepper, history, cfg, order_for, tau, t_stop)
    return out, tau_next, out.order
