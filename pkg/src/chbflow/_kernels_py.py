"""Pure numpy implementations of the hot per-step kernels.

Every function here has a twin with the same signature in the compiled
``_kernels`` extension. Spectral arrays use the half-spectrum layout of a
real 2D transform: shape ``(n, n // 2 + 1)``, rows indexed by ``ky``,
columns by ``kx``. ``kx``/``ky`` are first-derivative wavenumbers (Nyquist
zeroed), ``k2`` is the Laplacian symbol (Nyquist kept), ``colw`` holds the
half-spectrum column weights used for Parseval sums.
"""

import numpy as np

BACKEND = "python"


def phase_modes(a_hat, fp_hat, q1_hat, q2_hat, g_hat, kx, ky, k2, mask,
                alpha, tau, m0, eps2, s, phi_out, mu_out):
    """Mode-wise solve of the linearised phase equation.

    Solves ``(alpha/tau + m0*(eps2*k^4 + s*k^2)) phi = a/tau - m0*k^2*fp
    - i k.q + g`` and sets ``mu = (eps2*k^2 + s)*phi + fp``. Only the flux
    divergence is dealiased with ``mask``; ``fp`` is used as given so that
    ``mu`` stays the exact variation of the grid energy. ``g_hat`` may be None.
    """
    fp = fp_hat
    div = (1j * kx[None, :]) * q1_hat + (1j * ky[:, None]) * q2_hat
    rhs = a_hat / tau - m0 * k2 * fp - div * mask
    if g_hat is not None:
        rhs += g_hat
    denom = alpha / tau + m0 * k2 * (eps2 * k2 + s)
    np.divide(rhs, denom, out=phi_out)
    np.multiply(eps2 * k2 + s, phi_out, out=mu_out)
    mu_out += fp


def brinkman_modes(f1_hat, f2_hat, kx, ky, k2, nu, eta, u1_out, u2_out, p_out):
    """Leray-projected Brinkman solve, mode by mode.

    ``p = -i k.f / |k|^2`` (zero where ``|k| = 0``) and
    ``u = (f - i k p) / (nu*k2 + eta)``.
    """
    kxb = kx[None, :]
    kyb = ky[:, None]
    kk = kxb * kxb + kyb * kyb
    kdotf = kxb * f1_hat + kyb * f2_hat
    inv_kk = np.zeros_like(kk)
    np.divide(1.0, kk, out=inv_kk, where=kk > 0)
    np.multiply(-1j * kdotf, inv_kk, out=p_out)
    denom = nu * k2 + eta
    # f - i k p = f - k (k.f)/|k|^2
    proj = kdotf * inv_kk
    np.divide(f1_hat - kxb * proj, denom, out=u1_out)
    np.divide(f2_hat - kyb * proj, denom, out=u2_out)


def grad_sq_sum(f_hat, kx, ky, colw):
    """Half-spectrum sum of ``|k|^2 |f|^2`` weighted by ``colw``."""
    kk = kx[None, :] ** 2 + ky[:, None] ** 2
    a = f_hat.real ** 2 + f_hat.imag ** 2
    return float(np.sum((kk * a) * colw[None, :]))


def sq_sum(f_hat, colw):
    """Half-spectrum sum of ``|f|^2`` weighted by ``colw``."""
    a = f_hat.real ** 2 + f_hat.imag ** 2
    return float(np.sum(a * colw[None, :]))


def strain_sq_sum(u1_hat, u2_hat, kx, ky, colw):
    """Half-spectrum sum of the Frobenius square of ``grad u + grad u^T``."""
    kxb = kx[None, :]
    kyb = ky[:, None]
    d11 = 2.0 * kxb * u1_hat
    d22 = 2.0 * kyb * u2_hat
    d12 = kyb * u1_hat + kxb * u2_hat
    a = (np.abs(d11) ** 2 + np.abs(d22) ** 2 + 2.0 * np.abs(d12) ** 2)
    return float(np.sum(a * colw[None, :]))


def cubic_stab(phi, s, out):
    """``out = phi^3 - (s + 1) phi``."""
    np.multiply(phi, phi, out=out)
    out -= s + 1.0
    out *= phi


def double_well_sum(phi, scale):
    """Sum over the grid of ``F(scale*phi) = ((scale*phi)^2 - 1)^2 / 4``."""
    w = (scale * phi) ** 2 - 1.0
    return float(0.25 * np.sum(w * w))


def flux_products(phi, u1, u2, gx, gy, out):
    """Stack ``(u1*phi, u2*phi, phi*gx, phi*gy)`` into ``out`` (4, n, n)."""
    np.multiply(u1, phi, out=out[0])
    np.multiply(u2, phi, out=out[1])
    np.multiply(phi, gx, out=out[2])
    np.multiply(phi, gy, out=out[3])
