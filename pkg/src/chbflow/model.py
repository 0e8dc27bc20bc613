"""Cahn-Hilliard-Brinkman parameters, free energy and dissipation functionals."""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from chbflow import kernels


@dataclass(frozen=True)
class ConstantMobility:
    m0: float = 1.0

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError("mobility must be positive")


@dataclass(frozen=True)
class PecletMobility:
    """``M(phi) = sqrt((1+phi)^2 (1-phi)^2 + eps^2) / Pe``."""

    pe: float = 1.0

    def __post_init__(self):
        if not self.pe > 0:
            raise ValueError("Peclet number must be positive")


@dataclass(frozen=True)
class Buoyancy:
    """Boussinesq force ``(0, -lam * (phi - phi_bar))``; ``phi_bar=None`` uses the field mean."""

    lam: float
    phi_bar: Optional[float] = None


@dataclass(frozen=True)
class PhysicalParams:
    epsilon: float = 1.0
    gamma: float = 1.0
    s_stab: float = 0.0
    c0: float = 0.0
    mobility: Union[ConstantMobility, PecletMobility] = field(default_factory=ConstantMobility)
    nu: float = 1.0
    eta: float = 1.0
    buoyancy: Optional[Buoyancy] = None

    def __post_init__(self):
        for name in ("epsilon", "gamma", "nu", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.s_stab < 0 or self.c0 < 0:
            raise ValueError("s_stab and c0 must be non-negative")

    @property
    def variable_mobility(self):
        return isinstance(self.mobility, PecletMobility)


def mobility_values(phi, params):
    """Pointwise mobility; a float for constant mobility."""
    mob = params.mobility
    if isinstance(mob, ConstantMobility):
        return mob.m0
    w = (1.0 + phi) * (1.0 - phi)
    return np.sqrt(w * w + params.epsilon ** 2) / mob.pe


@dataclass
class FieldState:
    """One time level. Spectral arrays are authoritative for ``mu`` and ``p``."""

    grid: object
    t: float
    phi: np.ndarray
    u: np.ndarray
    phi_hat: np.ndarray
    mu_hat: np.ndarray
    u_hat: np.ndarray
    p_hat: np.ndarray
    e1: Optional[float] = None

    @property
    def mu(self):
        return self.grid.ifft(self.mu_hat)

    @property
    def p(self):
        return self.grid.ifft(self.p_hat)

    @classmethod
    def from_real(cls, grid, t, phi, u, p, params, mu=None):
        """Build a state from real fields; ``mu`` defaults to the chemical potential."""
        phi = np.ascontiguousarray(phi, dtype=float)
        u = np.ascontiguousarray(u, dtype=float)
        phi_hat = grid.fft(phi)
        mu_hat = chemical_potential_hat(grid, phi, params, phi_hat) if mu is None else grid.fft(mu)
        st = cls(grid, float(t), phi, u, phi_hat, mu_hat, grid.fft(u), grid.fft(p))
        st.e1 = energy(grid, phi, params, phi_hat) + params.c0
        return st


@dataclass
class AuxState:
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("auxiliary energy must be non-negative")


def double_well(phi):
    return 0.25 * (phi * phi - 1.0) ** 2


def f_prime(phi):
    return phi ** 3 - phi


def f_prime_stabilized(phi, s):
    """``phi^3 - (S + 1) phi`` pointwise (dealiasing belongs to the caller)."""
    phi = np.ascontiguousarray(phi, dtype=float)
    if phi.ndim != 2:
        return phi ** 3 - (s + 1.0) * phi
    out = np.empty_like(phi)
    kernels.cubic_stab(phi, float(s), out)
    return out


def chemical_potential_hat(grid, phi, params, phi_hat=None):
    """Spectral ``-eps^2 lap(phi) + F'(phi)``.

    The cubic is evaluated pointwise and not dealiased: with a truncated
    ``F'`` the chemical potential is no longer the variation of the grid
    energy, and under-resolved layers then gain energy while the auxiliary
    variable decays.
    """
    if phi_hat is None:
        phi_hat = grid.fft(phi)
    fp_hat = grid.fft(f_prime_stabilized(phi, 0.0))
    return params.epsilon ** 2 * grid.k2 * phi_hat + fp_hat


def chemical_potential(grid, phi, params):
    return grid.ifft(chemical_potential_hat(grid, phi, params))


def gradient_energy(grid, phi_hat, params, scale=1.0):
    """``int eps^2/2 |grad phi|^2`` from spectral coefficients."""
    # k2 weights (Nyquist kept) so that -eps^2 lap(phi) is its exact variation
    g = kernels.grad_sq_sum(phi_hat, grid.kx_full, grid.ky_full, grid.colw)
    return 0.5 * params.epsilon ** 2 * scale * scale * grid.parseval * g


def bulk_energy(grid, phi, scale=1.0):
    phi = np.ascontiguousarray(phi, dtype=float)
    return grid.dx * grid.dx * kernels.double_well_sum(phi, float(scale))


def energy(grid, phi, params, phi_hat=None, scale=1.0):
    """Free energy ``E`` of ``scale * phi``; add ``params.c0`` for ``E1``."""
    if phi_hat is None:
        phi_hat = grid.fft(phi)
    return gradient_energy(grid, phi_hat, params, scale) + bulk_energy(grid, phi, scale)


def energy1(grid, phi, params, phi_hat=None, scale=1.0):
    return energy(grid, phi, params, phi_hat, scale) + params.c0


def kappa(grid, phi, mu_hat, u_hat, params, scale=1.0):
    """Dissipation ``int M|grad mu|^2 + eta/gamma |u|^2 + nu/(2 gamma) |D(u)|^2``.

    ``mu_hat`` and ``u_hat`` are spectral; ``scale`` multiplies all three of
    ``phi``, ``mu`` and ``u`` (used for the rescaled solution).
    """
    w = grid.parseval * scale * scale
    if params.variable_mobility:
        mob = mobility_values(scale * phi, params)
        g = grid.ifft(np.stack([grid.ikx * mu_hat, grid.iky * mu_hat]))
        diff = scale * scale * grid.dx * grid.dx * float(np.sum(mob * (g[0] ** 2 + g[1] ** 2)))
    else:
        diff = params.mobility.m0 * w * kernels.grad_sq_sum(mu_hat, grid.kx_full, grid.ky_full, grid.colw)
    u1h = np.ascontiguousarray(u_hat[0])
    u2h = np.ascontiguousarray(u_hat[1])
    drag = params.eta / params.gamma * w * (kernels.sq_sum(u1h, grid.colw) + kernels.sq_sum(u2h, grid.colw))
    visc = params.nu / (2.0 * params.gamma) * w * kernels.strain_sq_sum(u1h, u2h, grid.kx, grid.ky, grid.colw)
    return diff + drag + visc


def kappa_real(grid, phi, mu, u, params):
    """Real-space quadrature of ``kappa``; the independent check for :func:`kappa`."""
    gm = grid.gradient(mu)
    mob = mobility_values(phi, params)
    g1 = grid.gradient(u[0])
    g2 = grid.gradient(u[1])
    d11 = 2 * g1[0]
    d22 = 2 * g2[1]
    d12 = g1[1] + g2[0]
    integrand = (mob * (gm[0] ** 2 + gm[1] ** 2)
                 + params.eta / params.gamma * (u[0] ** 2 + u[1] ** 2)
                 + params.nu / (2 * params.gamma) * (d11 ** 2 + d22 ** 2 + 2 * d12 ** 2))
    return grid.integrate(integrand * np.ones_like(phi))


def buoyancy_work(grid, phi, u2, params):
    """Power ``(1/gamma) int b(phi) . u`` of the buoyancy force on a vertical velocity ``u2``."""
    b = buoyancy_force(phi, params)[1]
    return grid.integrate(b * u2) / params.gamma


def buoyancy_force(phi, params):
    """Boussinesq vertical force as a ``(2, n, n)`` field."""
    b = params.buoyancy
    if b is None:
        raise ValueError("buoyancy is not configured")
    phi_bar = float(np.mean(phi)) if b.phi_bar is None else b.phi_bar
    out = np.zeros((2,) + np.shape(phi))
    out[1] = -b.lam * (phi - phi_bar)
    return out
