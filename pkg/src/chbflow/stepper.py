"""One relaxed IMEX-BDFk step for the Cahn-Hilliard-Brinkman system.

A step extrapolates the history, solves the Brinkman and phase equations
mode by mode, updates the auxiliary energy ``r``, rescales the intermediate
solution by ``zeta = 1 - (1 - xi)^(k+1)`` and finally relaxes ``r`` toward the
true energy of the rescaled state without breaking its monotone decay.
"""

import collections
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from chbflow import coeffs as bdf
from chbflow import kernels
from chbflow import model


class DegenerateEnergyError(ArithmeticError):
    """Raised when ``E1`` of the intermediate solution is not positive."""


class History:
    """Newest-first ring of accepted levels plus the auxiliary energy ``r``."""

    def __init__(self, state, r=None, maxlen=bdf.MAX_ORDER):
        self.levels = collections.deque([state], maxlen=maxlen)
        self.r = float(state.e1 if r is None else r)
        if self.r < 0:
            raise ValueError("auxiliary energy must be non-negative")

    @classmethod
    def from_levels(cls, levels, r):
        """``levels`` newest first."""
        h = cls(levels[-1], r)
        for st in reversed(levels[:-1]):
            h.levels.appendleft(st)
        h._check_stamps()
        return h

    def _check_stamps(self):
        ts = [s.t for s in self.levels]
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ValueError(f"history stamps not increasing: {ts[::-1]}")

    @property
    def latest(self):
        return self.levels[0]

    @property
    def t(self):
        return self.levels[0].t

    def __len__(self):
        return len(self.levels)

    def push(self, state, r):
        if state.t <= self.t:
            raise ValueError(f"new stamp {state.t} not after {self.t}")
        self.levels.appendleft(state)
        self.r = float(r)

    def accept(self, outcome):
        self.push(outcome.state, outcome.r_new)


@dataclass
class RelaxResult:
    sigma0: float
    delta: float
    r_new: float
    case: int


@dataclass
class StepOutcome:
    state: model.FieldState
    order: int
    tau: float
    r_prev: float
    r_tilde: float
    xi: float
    zeta: float
    sigma0: float
    delta: float
    e: float
    r_new: float
    e1_tilde: float
    kappa_tilde: float
    kappa_new: float
    case: int
    coeffs: bdf.BdfCoeffs
    tilde_mean: float
    retries: int = 0
    extra: dict = field(default_factory=dict)


def sav_update(r_n, tau, e1_tilde, kappa_tilde):
    """Closed-form auxiliary update; returns ``(r_tilde, xi)``."""
    if r_n < 0:
        raise ValueError("r must be non-negative")
    if not e1_tilde > 0:
        raise DegenerateEnergyError(f"E1 of the intermediate solution is {e1_tilde}")
    r_tilde = r_n / (1.0 + tau * kappa_tilde / e1_tilde)
    return r_tilde, r_tilde / e1_tilde


def scale_solution(xi, k, *fields):
    """``zeta = 1 - (1 - xi)^(k+1)`` and every field multiplied by it."""
    if xi < 0:
        raise ValueError("xi must be non-negative")
    zeta = 1.0 - (1.0 - xi) ** (k + 1)
    return (zeta,) + tuple(zeta * f for f in fields)


def relax(r_tilde, e1_tilde, e1_new, kappa_tilde, kappa_new, tau, r_prev=None):
    """Choose ``sigma0`` and ``delta`` for the relaxed update of ``r``.

    Cases (numbered as in the stability theorem): 1 ``r_tilde == E1_new``,
    2 ``r_tilde > E1_new``, 3 ``r_tilde < E1_new <= r_prev``, 4 ``E1_new > r_prev``.
    Here ``r_prev = r_tilde + tau * xi * kappa_tilde`` is the previous ``r``;
    when given explicitly, it also caps ``r_new`` against rounding drift.
    With ``kappa_new == 0`` cases 1-3 keep ``r_new = E1_new`` and ``delta = 0``.
    """
    if r_tilde < 0 or not e1_tilde > 0 or kappa_tilde < 0 or kappa_new < 0 or not tau > 0:
        raise ValueError("inadmissible relaxation inputs")
    q = tau * (r_tilde / e1_tilde) * kappa_tilde
    gap = e1_new - r_tilde
    if r_tilde - e1_new + q < 0:
        # w = 1 - sigma0; r_tilde + w * gap avoids cancellation
        w = min(max(q / gap, 0.0), 1.0)
        sigma0 = 1.0 - w
        delta = 0.0
        case = 4
        r_new = r_tilde + w * gap
    else:
        sigma0 = 0.0
        if r_tilde == e1_new:
            case = 1
        elif r_tilde > e1_new:
            case = 2
        else:
            case = 3
        if kappa_new > 0:
            delta = (r_tilde - e1_new) / (tau * kappa_new) + q / (tau * kappa_new)
        else:
            delta = 0.0
        r_new = e1_new
    if r_prev is not None:
        if case == 4:
            r_new = r_prev
        r_new = min(r_new, r_prev)
    return RelaxResult(sigma0, max(delta, 0.0), max(r_new, 0.0), case)


def relaxation_residual(r_tilde, e1_tilde, kappa_tilde, kappa_new, tau, res):
    """Relative residual of ``(r_new - r_tilde)/tau = -delta*k_new + xi*k_tilde``."""
    xi = r_tilde / e1_tilde
    lhs = res.r_new - r_tilde
    rhs = tau * (-res.delta * kappa_new + xi * kappa_tilde)
    scale = max(abs(res.r_new), abs(r_tilde), abs(tau * xi * kappa_tilde), 1e-300)
    return abs(lhs - rhs) / scale


def brinkman_forcing_hat(grid, params, phi_ext, grad_mu_ext, phi_ext_hat=None, products_hat=None):
    """Spectral right-hand side ``-gamma phi grad(mu) (+ b)`` of the Brinkman equation."""
    if products_hat is None:
        pg = np.stack([phi_ext * grad_mu_ext[0], phi_ext * grad_mu_ext[1]])
        products_hat = grid.fft(pg)
    f = -params.gamma * products_hat * grid.dealias_mask
    if params.buoyancy is not None:
        b = params.buoyancy
        if phi_ext_hat is None:
            phi_ext_hat = grid.fft(phi_ext)
        by = -b.lam * phi_ext_hat
        mean = phi_ext_hat[0, 0].real / grid.n ** 2
        phi_bar = mean if b.phi_bar is None else b.phi_bar
        by[0, 0] = -b.lam * (mean - phi_bar) * grid.n ** 2
        f[1] = f[1] + by
    return f


def brinkman_modes(grid, params, f_hat):
    u_hat = np.empty((2, grid.n, grid.m), dtype=complex)
    p_hat = np.empty((grid.n, grid.m), dtype=complex)
    kernels.brinkman_modes(np.ascontiguousarray(f_hat[0]), np.ascontiguousarray(f_hat[1]),
                           grid.kx, grid.ky, grid.k2, params.nu, params.eta,
                           u_hat[0], u_hat[1], p_hat)
    return u_hat, p_hat


def brinkman_solve(grid, phi_ext, mu_ext, params, force=None):
    """Solve ``-nu lap u + eta u + grad p = -gamma phi grad mu + b (+ force)``, ``div u = 0``.

    Returns real ``(u, p)``; ``force`` is an optional extra real ``(2, n, n)`` body force.
    """
    grad_mu = grid.gradient(mu_ext)
    f_hat = brinkman_forcing_hat(grid, params, phi_ext, grad_mu)
    if force is not None:
        f_hat = f_hat + grid.fft(force)
    u_hat, p_hat = brinkman_modes(grid, params, f_hat)
    return grid.ifft(u_hat), grid.ifft(p_hat)


@dataclass
class _Extrapolated:
    coeffs: bdf.BdfCoeffs
    t_new: float
    phi: np.ndarray
    phi_hat: np.ndarray
    u: np.ndarray
    mu_hat: np.ndarray
    grad_mu: np.ndarray
    a_hat: np.ndarray
    m0: float
    rhs_hat: np.ndarray  # (5, n, m): q1, q2, phi*dx mu, phi*dy mu, fp


class Stepper:
    """Binds grid, physics, optional manufactured forcing and the relaxation toggle.

    ``forcing`` is a callable ``t -> (g_phi_hat, g_u_hat)`` added to the
    phase and momentum right-hand sides at the new time level. If it also has
    a ``power(t)`` method, that energy input enters the auxiliary equation as
    ``r^n + tau * power(t^{n+1})`` so forced runs keep ``r`` consistent with ``E1``.

    ``buoyancy_work`` does the same for the buoyancy force: its work
    ``(1/gamma) int b(phi*) . u~`` is added to ``r^n``. Off by default, since
    ``r`` may then increase.
    """

    def __init__(self, grid, params, forcing=None, relax=True, buoyancy_work=False):
        self.grid = grid
        self.params = params
        self.forcing = forcing
        self.relax = relax
        self.buoyancy_work = buoyancy_work and params.buoyancy is not None

    # -- Step 1 pieces ---------------------------------------------------------
    def extrapolate(self, history, tau, k):
        if not tau > 0:
            raise ValueError(f"step size must be positive, got {tau}")
        if len(history) < k:
            raise ValueError(f"order {k} needs {k} history levels, have {len(history)}")
        g = self.grid
        levels = list(history.levels)[:k]
        t_new = levels[0].t + tau
        c = bdf.bdf_weights(k, [t_new] + [s.t for s in levels])
        phi = bdf.combine(c.b_weights, [s.phi for s in levels])
        phi_hat = bdf.combine(c.b_weights, [s.phi_hat for s in levels])
        u = bdf.combine(c.b_weights, [s.u for s in levels])
        mu_hat = bdf.combine(c.b_weights, [s.mu_hat for s in levels])
        a_hat = bdf.combine(c.a_weights, [s.phi_hat for s in levels])
        grad_mu = g.ifft(np.stack([g.ikx * mu_hat, g.iky * mu_hat]))

        work = np.empty((5, g.n, g.n))
        kernels.flux_products(phi, np.ascontiguousarray(u[0]), np.ascontiguousarray(u[1]),
                              np.ascontiguousarray(grad_mu[0]), np.ascontiguousarray(grad_mu[1]),
                              work[:4])
        if self.params.variable_mobility:
            mob = model.mobility_values(phi, self.params)
            m0 = float(mob.max())
            dm = mob - m0
            # explicit part of div((M - M0) grad mu) enters the flux with a minus sign
            work[0] -= dm * grad_mu[0]
            work[1] -= dm * grad_mu[1]
        else:
            m0 = self.params.mobility.m0
        kernels.cubic_stab(phi, self.params.s_stab, work[4])
        rhs_hat = g.fft(work)
        return _Extrapolated(c, t_new, phi, phi_hat, u, mu_hat, grad_mu, a_hat, m0, rhs_hat)

    def solve_brinkman(self, ext, g_u_hat=None):
        f_hat = brinkman_forcing_hat(self.grid, self.params, ext.phi, ext.grad_mu,
                                     ext.phi_hat, ext.rhs_hat[2:4])
        if g_u_hat is not None:
            f_hat = f_hat + g_u_hat
        return brinkman_modes(self.grid, self.params, f_hat)

    def solve_phase(self, ext, g_phi_hat=None):
        g = self.grid
        p = self.params
        phi_hat = np.empty((g.n, g.m), dtype=complex)
        mu_hat = np.empty((g.n, g.m), dtype=complex)
        kernels.phase_modes(ext.a_hat, ext.rhs_hat[4], ext.rhs_hat[0], ext.rhs_hat[1],
                            g_phi_hat, g.kx, g.ky, g.k2, g.mask_f,
                            ext.coeffs.alpha, ext.coeffs.tau, ext.m0,
                            p.epsilon ** 2, p.s_stab, phi_hat, mu_hat)
        return phi_hat, mu_hat

    def phase_residual(self, ext, phi_hat, mu_hat, g_phi_hat=None):
        """Relative spectral max-norm residual of the two phase equations."""
        g = self.grid
        p = self.params
        c = ext.coeffs
        fp = ext.rhs_hat[4]
        div_q = (g.ikx * ext.rhs_hat[0] + g.iky * ext.rhs_hat[1]) * g.dealias_mask
        r1 = (c.alpha * phi_hat - ext.a_hat) / c.tau - (-ext.m0 * g.k2 * mu_hat - div_q)
        if g_phi_hat is not None:
            r1 = r1 - g_phi_hat
        r2 = mu_hat - (p.epsilon ** 2 * g.k2 * phi_hat + p.s_stab * phi_hat + fp)
        s1 = max(np.abs(c.alpha * phi_hat / c.tau).max(), np.abs(ext.a_hat / c.tau).max(), 1e-300)
        s2 = max(np.abs(mu_hat).max(), 1e-300)
        return max(np.abs(r1).max() / s1, np.abs(r2).max() / s2)

    # -- full step ---------------------------------------------------------------
    def step(self, history, tau, k):
        """Attempt one step of order ``k`` from ``history`` (which is not modified)."""
        g = self.grid
        p = self.params
        ext = self.extrapolate(history, tau, k)
        g_phi_hat = g_u_hat = None
        if self.forcing is not None:
            g_phi_hat, g_u_hat = self.forcing(ext.t_new)
        u_hat, p_hat = self.solve_brinkman(ext, g_u_hat)
        phi_hat, mu_hat = self.solve_phase(ext, g_phi_hat)

        real = g.ifft(np.stack([phi_hat, u_hat[0], u_hat[1]]))
        phi_t = np.ascontiguousarray(real[0])
        e1_t = model.energy(g, phi_t, p, phi_hat) + p.c0
        kappa_t = model.kappa(g, phi_t, mu_hat, u_hat, p)
        r_n = history.r
        power = getattr(self.forcing, "power", None)
        if power is not None:
            r_n = max(r_n + tau * power(ext.t_new), 0.0)
        if self.buoyancy_work:
            r_n = max(r_n + tau * model.buoyancy_work(g, ext.phi, real[2], p), 0.0)
        r_t, xi = sav_update(r_n, tau, e1_t, kappa_t)
        zeta = 1.0 - (1.0 - xi) ** (k + 1)

        phi_new = zeta * phi_t
        u_new = zeta * real[1:]
        phi_new_hat = zeta * phi_hat
        mu_new_hat = model.chemical_potential_hat(g, phi_new, p, phi_new_hat)
        u_new_hat = zeta * u_hat
        e1_new = (model.gradient_energy(g, phi_hat, p, zeta)
                  + model.bulk_energy(g, phi_t, zeta) + p.c0)
        kappa_new = model.kappa(g, phi_new, mu_new_hat, u_new_hat, p)

        if self.relax:
            rr = relax(r_t, e1_t, e1_new, kappa_t, kappa_new, tau, r_prev=r_n)
        else:
            d = xi * kappa_t / kappa_new if kappa_new > 0 else 0.0
            rr = RelaxResult(1.0, d, r_t, 0)

        state = model.FieldState(g, ext.t_new, phi_new, u_new, phi_new_hat, mu_new_hat,
                                 u_new_hat, zeta * p_hat, e1_new)
        return StepOutcome(
            state=state, order=k, tau=tau, r_prev=r_n, r_tilde=r_t, xi=xi, zeta=zeta,
            sigma0=rr.sigma0, delta=rr.delta, e=abs(1.0 - xi), r_new=rr.r_new,
            e1_tilde=e1_t, kappa_tilde=kappa_t, kappa_new=kappa_new, case=rr.case,
            coeffs=ext.coeffs, tilde_mean=phi_hat[0, 0].real / g.n ** 2)


def state_from_phi(grid, params, phi, t=0.0):
    """Initial level from a phase field, with the velocity/pressure it induces."""
    phi = np.ascontiguousarray(phi, dtype=float)
    phi_hat = grid.fft(phi)
    mu_hat = model.chemical_potential_hat(grid, phi, params, phi_hat)
    grad_mu = grid.ifft(np.stack([grid.ikx * mu_hat, grid.iky * mu_hat]))
    f_hat = brinkman_forcing_hat(grid, params, phi, grad_mu, phi_hat)
    u_hat, p_hat = brinkman_modes(grid, params, f_hat)
    st = model.FieldState(grid, float(t), phi, grid.ifft(u_hat), phi_hat, mu_hat, u_hat, p_hat)
    st.e1 = model.energy(grid, phi, params, phi_hat) + params.c0
    return st


def phase_solve(stepper, history, tau, k):
    """Intermediate ``(phi_tilde, mu_tilde)`` as real fields."""
    ext = stepper.extrapolate(history, tau, k)
    g_phi = stepper.forcing(ext.t_new)[0] if stepper.forcing is not None else None
    phi_hat, mu_hat = stepper.solve_phase(ext, g_phi)
    return stepper.grid.ifft(phi_hat), stepper.grid.ifft(mu_hat)


def step(stepper, history, tau, k):
    return stepper.step(history, tau, k)
