"""Fourier pseudo-spectral algebra on a periodic ``n x n`` grid over ``[0, L]^2``.

Real fields are ``(n, n)`` arrays indexed ``[iy, ix]`` (x varies along the last
axis); vector fields are ``(2, n, n)`` with components ``(u1, u2)``. Spectral
coefficients use the half-spectrum of the real transform, shape
``(n, n // 2 + 1)``, unnormalised forward / normalised inverse.
"""

import math
import os
import threading

import numpy as np
import scipy.fft

try:
    import pyfftw
    import pyfftw.builders
except ImportError:  # pragma: no cover - exercised only without pyfftw
    pyfftw = None


def _use_fftw():
    return pyfftw is not None and os.environ.get("CHBFLOW_FFT", "auto") != "scipy"


class _FFTWPlans(threading.local):
    """Per-thread pyFFTW plans keyed by input shape."""

    def __init__(self):
        self.fwd = {}
        self.inv = {}


class SpectralGrid:
    """Grid metadata, wavenumber tables and transforms.

    Attributes
    ----------
    n, length : grid points per axis and domain size
    wavenumbers : ``(n,)`` per-axis angular wavenumbers in transform order
    dealias_mask : boolean half-spectrum mask keeping ``|mode| <= n/3``
    kx, ky : first-derivative wavenumbers along columns / rows (Nyquist zeroed)
    kx_full, ky_full : the same with Nyquist kept; ``k2 = kx_full^2 + ky_full^2``
    k2 : Laplacian symbol ``|k|^2`` on the half spectrum (Nyquist kept)
    colw : Parseval column weights (1 for the self-conjugate columns, else 2)
    """

    def __init__(self, n, length=2 * math.pi):
        n = int(n)
        if n < 4 or n % 2:
            raise ValueError(f"grid size must be even and >= 4, got {n}")
        if n & (n - 1):
            raise ValueError(f"grid size must be a power of two, got {n}")
        if not length > 0:
            raise ValueError(f"domain length must be positive, got {length}")
        self.n = n
        self.length = float(length)
        self.m = n // 2 + 1
        self.dx = self.length / n
        self.area = self.length ** 2
        scale = 2 * math.pi / self.length

        modes = np.fft.fftfreq(n, d=1.0 / n)
        self.modes = modes
        self.wavenumbers = modes * scale
        kfull_x = np.abs(modes[: self.m]) * scale
        kfull_y = modes * scale
        self.kx = kfull_x.copy()
        self.kx[-1] = 0.0
        self.ky = kfull_y.copy()
        self.ky[n // 2] = 0.0
        self.kx_full = kfull_x
        self.ky_full = kfull_y
        self.k2 = kfull_x[None, :] ** 2 + kfull_y[:, None] ** 2
        self.ikx = 1j * self.kx[None, :]
        self.iky = 1j * self.ky[:, None]

        keep_x = np.abs(modes[: self.m]) <= n / 3
        keep_y = np.abs(modes) <= n / 3
        self.dealias_mask = keep_y[:, None] & keep_x[None, :]
        self.mask_f = self.dealias_mask.astype(float)

        self.colw = np.full(self.m, 2.0)
        self.colw[0] = 1.0
        self.colw[-1] = 1.0
        # integral of f*g from half-spectrum coefficients
        self.parseval = self.area / float(n) ** 4

        self._plans = _FFTWPlans()
        self.backend = "fftw" if _use_fftw() else "scipy"

    def __repr__(self):
        return f"SpectralGrid(n={self.n}, length={self.length:g})"

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_plans"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._plans = _FFTWPlans()

    # -- coordinates -----------------------------------------------------------
    def coords(self):
        """Return ``(X, Y)`` node coordinates, each ``(n, n)``."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="xy")

    # -- transforms ------------------------------------------------------------
    def _check(self, f, spectral=False):
        shape = (self.n, self.m) if spectral else (self.n, self.n)
        if f.shape[-2:] != shape:
            raise ValueError(f"field shape {f.shape} does not match {self!r}")

    def fft(self, f):
        """Forward real transform over the last two axes."""
        f = np.asarray(f, dtype=float)
        self._check(f)
        if self.backend == "fftw":
            plan = self._plans.fwd.get(f.shape)
            if plan is None:
                plan = pyfftw.builders.rfft2(
                    pyfftw.empty_aligned(f.shape, dtype="float64"),
                    axes=(-2, -1), planner_effort="FFTW_MEASURE", threads=1)
                self._plans.fwd[f.shape] = plan
            plan.input_array[...] = f
            return plan().copy()
        return scipy.fft.rfft2(f)

    def ifft(self, fh):
        """Inverse real transform over the last two axes."""
        fh = np.asarray(fh, dtype=complex)
        self._check(fh, spectral=True)
        if self.backend == "fftw":
            plan = self._plans.inv.get(fh.shape)
            if plan is None:
                plan = pyfftw.builders.irfft2(
                    pyfftw.empty_aligned(fh.shape, dtype="complex128"),
                    s=(self.n, self.n), axes=(-2, -1),
                    planner_effort="FFTW_MEASURE", threads=1)
                self._plans.inv[fh.shape] = plan
            # c2r destroys its input, so never hand FFTW the caller's array
            plan.input_array[...] = fh
            return plan().copy()
        return scipy.fft.irfft2(fh, s=(self.n, self.n))

    # -- differential operators ------------------------------------------------
    def gradient(self, f):
        """Spectral gradient of a scalar field, returned as ``(2, n, n)``."""
        fh = self.fft(f)
        return self.ifft(np.stack([self.ikx * fh, self.iky * fh]))

    def divergence(self, v):
        v = np.asarray(v)
        if v.shape[0] != 2:
            raise ValueError("vector field must have shape (2, n, n)")
        vh = self.fft(v)
        return self.ifft(self.ikx * vh[0] + self.iky * vh[1])

    def laplacian(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def biharmonic(self, f):
        return self.ifft(self.k2 ** 2 * self.fft(f))

    def dealias(self, f):
        """Zero every mode outside the 2/3-rule mask."""
        return self.ifft(self.fft(f) * self.dealias_mask)

    # -- quadrature ------------------------------------------------------------
    def integrate(self, f):
        """Trapezoidal (spectrally exact) integral over the domain."""
        f = np.asarray(f, dtype=float)
        self._check(f)
        return float(self.dx * self.dx * np.sum(f, axis=(-2, -1)))

    def mean(self, f):
        return float(np.mean(f))

    def spectral_inner(self, fh, gh):
        """Integral of ``f*g`` from half-spectrum coefficients (Parseval)."""
        prod = (fh * np.conj(gh)).real
        return float(self.parseval * np.sum(prod * self.colw[None, :]))

    def l2_norm(self, f):
        f = np.asarray(f, dtype=float)
        return math.sqrt(self.dx * self.dx * float(np.sum(f * f)))


def make_grid(n, length=2 * math.pi):
    """Build a :class:`SpectralGrid`; rejects odd, tiny or non power-of-two ``n``."""
    return SpectralGrid(n, length)
