"""Manufactured solution for temporal convergence studies.

Exact fields on ``[0, 2pi]^2``::

    phi = cos x sin y cos t        u1 = sin x sin y sin t
    p   = cos x sin y sin t        u2 = cos x cos y sin t

The forcing is the residual of the continuous system evaluated with spectral
operators on samples of these fields, so it is exact for this band-limited
solution.
"""

import math
from dataclasses import dataclass

import numpy as np

from chbflow import model
from chbflow.stepper import History, Stepper

EXAMPLE_PARAMS = model.PhysicalParams(epsilon=1.0, gamma=2.0, s_stab=0.0, c0=0.0,
                                      mobility=model.ConstantMobility(1.0), nu=1.0, eta=1.0)


class ExactSolution:
    def __init__(self, grid):
        self.grid = grid
        self.X, self.Y = grid.coords()

    def phi(self, t):
        return np.cos(self.X) * np.sin(self.Y) * math.cos(t)

    def phi_t(self, t):
        return -np.cos(self.X) * np.sin(self.Y) * math.sin(t)

    def u(self, t):
        return np.stack([np.sin(self.X) * np.sin(self.Y) * math.sin(t),
                         np.cos(self.X) * np.cos(self.Y) * math.sin(t)])

    def p(self, t):
        return np.cos(self.X) * np.sin(self.Y) * math.sin(t)

    def grad_p(self, t):
        return np.stack([-np.sin(self.X) * np.sin(self.Y) * math.sin(t),
                         np.cos(self.X) * np.cos(self.Y) * math.sin(t)])


def exact_fields(grid, t, params=EXAMPLE_PARAMS, exact=None):
    ex = exact or ExactSolution(grid)
    return model.FieldState.from_real(grid, t, ex.phi(t), ex.u(t), ex.p(t), params)


class Forcing:
    """Callable ``t -> (g_phi_hat, g_u_hat)`` for the forced system."""

    def __init__(self, grid, params=EXAMPLE_PARAMS):
        self.grid = grid
        self.params = params
        self.exact = ExactSolution(grid)

    def real(self, t):
        """Real-space forcing ``(g_phi, g_u)``."""
        g = self.grid
        p = self.params
        phi = self.exact.phi(t)
        u = self.exact.u(t)
        mu = model.chemical_potential(g, phi, p)
        grad_mu = g.gradient(mu)
        mob = model.mobility_values(phi, p)
        g_phi = (self.exact.phi_t(t)
                 - g.divergence(mob * grad_mu)
                 + g.divergence(u * phi))
        div_u = g.divergence(u)
        grad_div = g.gradient(div_u)
        visc = np.stack([g.laplacian(u[0]), g.laplacian(u[1])]) + grad_div
        g_u = (-p.nu * visc + p.eta * u + g.gradient(self.exact.p(t))
               + p.gamma * phi * grad_mu)
        return g_phi, g_u

    def power(self, t):
        """Energy input ``int g_phi mu + (1/gamma) int g_u . u`` of the forcing."""
        g = self.grid
        g_phi, g_u = self.real(t)
        mu = model.chemical_potential(g, self.exact.phi(t), self.params)
        u = self.exact.u(t)
        return g.integrate(g_phi * mu) + g.integrate(np.sum(g_u * u, axis=0)) / self.params.gamma

    def __call__(self, t):
        g_phi, g_u = self.real(t)
        return self.grid.fft(g_phi), self.grid.fft(g_u)


def forcing(grid, t, params=EXAMPLE_PARAMS):
    return Forcing(grid, params).real(t)


def bootstrap_history(grid, k, tau, t0=0.0, params=EXAMPLE_PARAMS):
    """History of ``k`` exact levels at ``t0, t0 - tau, ...``; ``r = E1(phi(t0))``."""
    exact = ExactSolution(grid)
    levels = [exact_fields(grid, t0 - j * tau, params, exact) for j in range(k)]
    return History.from_levels(levels, levels[0].e1)


@dataclass
class MmsErrors:
    tau: float
    steps: int
    phi: float
    u1: float
    u2: float
    px: float
    py: float


def run_mms(grid, k, tau, t_final=1.0, params=EXAMPLE_PARAMS, relax=True):
    """Fixed-step forced run from exact history; L2 errors at ``t_final``."""
    steps = int(round(t_final / tau))
    if abs(steps * tau - t_final) > 1e-9 * t_final:
        raise ValueError("t_final must be a multiple of tau")
    stepper = Stepper(grid, params, forcing=Forcing(grid, params), relax=relax)
    hist = bootstrap_history(grid, k, tau, 0.0, params)
    for _ in range(steps):
        hist.accept(stepper.step(hist, tau, k))
    return exact_errors(grid, hist.latest, tau, steps)


def exact_errors(grid, st, tau=float("nan"), steps=0, exact=None):
    """L2 errors of a state against the exact fields at ``st.t``."""
    ex = exact or ExactSolution(grid)
    t = st.t
    gp = grid.ifft(np.stack([grid.ikx * st.p_hat, grid.iky * st.p_hat]))
    gpe = ex.grad_p(t)
    ue = ex.u(t)
    l2 = grid.l2_norm
    return MmsErrors(tau, steps, l2(st.phi - ex.phi(t)), l2(st.u[0] - ue[0]), l2(st.u[1] - ue[1]),
                     l2(gp[0] - gpe[0]), l2(gp[1] - gpe[1]))


def observed_order(taus, errors):
    """Least-squares slope of ``log(error)`` against ``log(tau)``."""
    x = np.log(np.asarray(taus, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(grid, k, taus, t_final=1.0, params=EXAMPLE_PARAMS):
    return [run_mms(grid, k, tau, t_final, params) for tau in taus]

