import math
from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from chbflow import adaptive


def blk(**kw):
    base = dict(rho=0.75, tol=1e-3, r=0.5, m=1.0, tau_min=1e-6, tau_max=1.0, gamma_star=1.0)
    base.update(kw)
    return adaptive.OrderConfig(**base)


def test_a_dp_examples():
    c = adaptive.OrderConfig(rho=0.75, tol=1e-3, r=0.5)
    assert adaptive.a_dp(1e-3, 1e-3, c) == pytest.approx(7.5e-4)
    assert adaptive.a_dp(4e-3, 1.0, c) == pytest.approx(0.375)
    assert adaptive.a_dp(c.tol, 2.0, c) == pytest.approx(c.rho * 2.0)


def test_clamp_examples():
    c = blk(tau_max=2.0)
    assert adaptive.step_cap(0.0, c) == 2.0
    assert adaptive.step_cap(-math.sqrt(3), c) == pytest.approx(1.0)
    assert adaptive.clamp_step(1e-9, 0.0, c) == c.tau_min
    assert adaptive.clamp_step(5.0, 0.0, c) == 2.0
    assert adaptive.clamp_step(0.5, 0.0, c) == 0.5


@pytest.mark.parametrize("kw", [dict(rho=0.0), dict(rho=1.5), dict(tol=0.0), dict(r=0.0),
                                dict(m=0.0), dict(m=1.2), dict(tau_min=2.0, tau_max=1.0),
                                dict(gamma_star=-1.0)])
def test_order_config_validation(kw):
    with pytest.raises(ValueError):
        blk(**kw)


class Level(SimpleNamespace):
    pass


class FakeHistory:
    def __init__(self, levels):
        self.levels = levels  # newest first

    @property
    def t(self):
        return self.levels[0].t

    @property
    def latest(self):
        return self.levels[0]

    def __len__(self):
        return len(self.levels)


def test_energy_rate_examples():
    assert adaptive.estimate_energy_rate(FakeHistory([Level(t=0.0, e1=1.0)])) == 0.0
    h = FakeHistory([Level(t=0.2, e1=1.0), Level(t=0.1, e1=1.0)])
    assert adaptive.estimate_energy_rate(h) == 0.0
    h = FakeHistory([Level(t=0.2, e1=0.8), Level(t=0.1, e1=1.0)])
    assert adaptive.estimate_energy_rate(h) == pytest.approx(-2.0)


class FakeStepper:
    """Indicator ``e = c * tau^p`` with a linearly decaying energy."""

    def __init__(self, c=1.0, p=1.0, xi_one=False):
        self.c, self.p, self.xi_one = c, p, xi_one
        self.calls = []

    def step(self, history, tau, k):
        self.calls.append((tau, k))
        e = 0.0 if self.xi_one else self.c * tau ** self.p
        t = history.t + tau
        state = Level(t=t, e1=history.latest.e1 - 0.1 * tau)
        return SimpleNamespace(state=state, tau=tau, order=k, e=e, xi=1 - e, retries=0)


def hist0():
    return FakeHistory([Level(t=0.0, e1=1.0)])


def test_perfect_indicator_accepts_and_jumps_to_cap():
    cfg = adaptive.AdaptiveConfig({2: blk(tau_max=0.5, gamma_star=0.0)})
    s = FakeStepper(xi_one=True)
    out, tau_next = adaptive.adaptive_step(s, hist0(), cfg, 2, 0.01)
    assert len(s.calls) == 1 and out.retries == 0
    assert tau_next == 0.5


def test_accept_branch_single_call():
    cfg = adaptive.AdaptiveConfig({2: blk()})
    s = FakeStepper(c=1e-2, p=1.0)
    out, tau_next = adaptive.adaptive_step(s, hist0(), cfg, 2, 0.05)
    assert len(s.calls) == 1
    assert out.e ** 1.0 <= cfg.block(2).tol
    e = out.e
    assert tau_next == pytest.approx(min(0.75 * (1e-3 / e) ** 0.5 * 0.05, adaptive.step_cap(-0.1, cfg.block(2))))


def test_rejections_shrink_monotonically():
    cfg = adaptive.AdaptiveConfig({2: blk(tol=1e-4, rho=0.9, r=0.5)}, max_retries=50)
    s = FakeStepper(c=1.0, p=2.0)
    out, _ = adaptive.adaptive_step(s, hist0(), cfg, 2, 0.5)
    taus = [c[0] for c in s.calls]
    assert all(b < a for a, b in zip(taus, taus[1:]))
    assert out.e <= 1e-4
    assert out.retries == len(taus) - 1
    assert out.tau == taus[-1]


def test_retry_cap_accepts_tau_min():
    b = blk(tol=1e-12, tau_min=1e-3, rho=0.99, r=0.01)
    cfg = adaptive.AdaptiveConfig({1: b}, max_retries=3)
    s = FakeStepper(c=1.0, p=1.0)
    out, _ = adaptive.adaptive_step(s, hist0(), cfg, 1, 0.5)
    assert out.tau == b.tau_min
    assert out.retries == 3


def test_floor_reached_before_cap():
    b = blk(tol=1e-12, tau_min=1e-2)
    cfg = adaptive.AdaptiveConfig({1: b}, max_retries=20)
    s = FakeStepper(c=1.0, p=1.0)
    out, _ = adaptive.adaptive_step(s, hist0(), cfg, 1, 0.5)
    assert out.tau == b.tau_min
    assert out.retries < 20


def test_step_clipped_to_stop_time():
    cfg = adaptive.AdaptiveConfig({2: blk()})
    s = FakeStepper(c=1e-4)
    out, _ = adaptive.adaptive_step(s, hist0(), cfg, 2, 0.3, t_stop=0.1)
    assert out.state.t == 0.1


def test_order_limited_by_history_length():
    cfg = adaptive.AdaptiveConfig({3: blk()})
    s = FakeStepper(c=1e-4)
    out, _ = adaptive.adaptive_step(s, hist0(), cfg, 3, 0.01)
    assert s.calls[0][1] == 1


@pytest.mark.parametrize("tc, expect", [(0.0, 2), (10.0, 3)])
def test_hybrid_extremes(tc, expect):
    cfg = adaptive.AdaptiveConfig({2: blk(), 3: blk()}, t_switch=tc)
    h = FakeHistory([Level(t=0.3, e1=1.0), Level(t=0.2, e1=1.1), Level(t=0.1, e1=1.2)])
    s = FakeStepper(c=1e-3)
    _, _, order = adaptive.hybrid_step(s, h, cfg, 0.01)
    assert order == expect


def test_hybrid_switches_once():
    cfg = adaptive.AdaptiveConfig({2: blk(tau_max=0.05), 3: blk(tau_max=0.02)}, t_switch=0.5)
    s = FakeStepper(c=1e-2)
    levels = [Level(t=0.0, e1=1.0)]
    orders = []
    tau = 0.01
    while levels[0].t < 1.0 - 1e-12:
        h = FakeHistory(levels)
        out, tau, order = adaptive.hybrid_step(s, h, cfg, tau, t_stop=1.0)
        if out.state.t <= 0.5 + 1e-12:
            assert order == min(3, len(levels))
        else:
            assert order == 2
        orders.append(order)
        levels = [out.state] + levels[:3]
    after_ramp = orders[2:]
    switches = sum(1 for a, b in zip(after_ramp, after_ramp[1:]) if a != b)
    assert switches == 1


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 10), st.floats(0.5, 3), st.floats(1e-3, 1))
def test_accepted_steps_within_bounds(c, p, tau0):
    b = blk(tau_min=1e-5, tau_max=0.2, tol=1e-3)
    cfg = adaptive.AdaptiveConfig({2: b})
    s = FakeStepper(c=c, p=p)
    out, tau_next = adaptive.adaptive_step(s, hist0(), cfg, 2, tau0)
    assert b.tau_min <= out.tau <= b.tau_max
    assert b.tau_min <= tau_next <= b.tau_max
    assert out.e ** b.m <= b.tol or out.tau == b.tau_min


def test_deterministic():
    cfg = adaptive.AdaptiveConfig({2: blk(tol=1e-5)})
    runs = []
    for _ in range(2):
        s = FakeStepper(c=3.0, p=1.5)
        adaptive.adaptive_step(s, hist0(), cfg, 2, 0.4)
        runs.append(s.calls)
    assert runs[0] == runs[1]
