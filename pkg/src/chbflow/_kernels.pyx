# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step kernels; see ``_kernels_py`` for the reference semantics."""

BACKEND = "cython"


def phase_modes(const double complex[:, ::1] a_hat,
                const double complex[:, ::1] fp_hat,
                const double complex[:, ::1] q1_hat,
                const double complex[:, ::1] q2_hat,
                g_hat,
                const double[::1] kx, const double[::1] ky,
                const double[:, ::1] k2, const double[:, ::1] mask,
                double alpha, double tau, double m0, double eps2, double s,
                double complex[:, ::1] phi_out, double complex[:, ::1] mu_out):
    cdef Py_ssize_t n = a_hat.shape[0], m = a_hat.shape[1], j, i
    cdef const double complex[:, ::1] g
    cdef bint has_g = g_hat is not None
    cdef double complex fp, div, rhs, ph
    cdef double kk, inv_tau = 1.0 / tau, a_tau = alpha / tau, mk
    cdef double complex I = 1j
    if has_g:
        g = g_hat
    for j in range(n):
        for i in range(m):
            mk = mask[j, i]
            kk = k2[j, i]
            fp = fp_hat[j, i]
            div = I * (kx[i] * q1_hat[j, i] + ky[j] * q2_hat[j, i]) * mk
            rhs = a_hat[j, i] * inv_tau - m0 * kk * fp - div
            if has_g:
                rhs = rhs + g[j, i]
            ph = rhs / (a_tau + m0 * kk * (eps2 * kk + s))
            phi_out[j, i] = ph
            mu_out[j, i] = (eps2 * kk + s) * ph + fp


def brinkman_modes(const double complex[:, ::1] f1_hat,
                   const double complex[:, ::1] f2_hat,
                   const double[::1] kx, const double[::1] ky,
                   const double[:, ::1] k2, double nu, double eta,
                   double complex[:, ::1] u1_out, double complex[:, ::1] u2_out,
                   double complex[:, ::1] p_out):
    cdef Py_ssize_t n = f1_hat.shape[0], m = f1_hat.shape[1], j, i
    cdef double kxi, kyj, kk, inv_kk, denom
    cdef double complex kdotf, proj
    cdef double complex I = 1j
    for j in range(n):
        kyj = ky[j]
        for i in range(m):
            kxi = kx[i]
            kk = kxi * kxi + kyj * kyj
            inv_kk = 1.0 / kk if kk > 0.0 else 0.0
            kdotf = kxi * f1_hat[j, i] + kyj * f2_hat[j, i]
            proj = kdotf * inv_kk
            p_out[j, i] = -I * proj
            denom = nu * k2[j, i] + eta
            u1_out[j, i] = (f1_hat[j, i] - kxi * proj) / denom
            u2_out[j, i] = (f2_hat[j, i] - kyj * proj) / denom


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def grad_sq_sum(const double complex[:, ::1] f_hat, const double[::1] kx,
                const double[::1] ky, const double[::1] colw):
    cdef Py_ssize_t n = f_hat.shape[0], m = f_hat.shape[1], j, i
    cdef double acc = 0.0, row
    for j in range(n):
        row = 0.0
        for i in range(m):
            row += colw[i] * (kx[i] * kx[i] + ky[j] * ky[j]) * _abs2(f_hat[j, i])
        acc += row
    return acc


def sq_sum(const double complex[:, ::1] f_hat, const double[::1] colw):
    cdef Py_ssize_t n = f_hat.shape[0], m = f_hat.shape[1], j, i
    cdef double acc = 0.0
    for j in range(n):
        for i in range(m):
            acc += colw[i] * _abs2(f_hat[j, i])
    return acc


def strain_sq_sum(const double complex[:, ::1] u1_hat,
                  const double complex[:, ::1] u2_hat,
                  const double[::1] kx, const double[::1] ky,
                  const double[::1] colw):
    cdef Py_ssize_t n = u1_hat.shape[0], m = u1_hat.shape[1], j, i
    cdef double acc = 0.0
    cdef double complex d11, d22, d12
    for j in range(n):
        for i in range(m):
            d11 = 2.0 * kx[i] * u1_hat[j, i]
            d22 = 2.0 * ky[j] * u2_hat[j, i]
            d12 = ky[j] * u1_hat[j, i] + kx[i] * u2_hat[j, i]
            acc += colw[i] * (_abs2(d11) + _abs2(d22) + 2.0 * _abs2(d12))
    return acc


def cubic_stab(const double[:, ::1] phi, double s, double[:, ::1] out):
    cdef Py_ssize_t n = phi.shape[0], m = phi.shape[1], j, i
    cdef double v, c = s + 1.0
    for j in range(n):
        for i in range(m):
            v = phi[j, i]
            out[j, i] = (v * v - c) * v


def double_well_sum(const double[:, ::1] phi, double scale):
    cdef Py_ssize_t n = phi.shape[0], m = phi.shape[1], j, i
    cdef double v, w, acc = 0.0
    for j in range(n):
        for i in range(m):
            v = scale * phi[j, i]
            w = v * v - 1.0
            acc += w * w
    return 0.25 * acc


def flux_products(const double[:, ::1] phi, const double[:, ::1] u1,
                  const double[:, ::1] u2, const double[:, ::1] gx,
                  const double[:, ::1] gy, double[:, :, ::1] out):
    cdef Py_ssize_t n = phi.shape[0], m = phi.shape[1], j, i
    cdef double v
    for j in range(n):
        for i in range(m):
            v = phi[j, i]
            out[0, j, i] = u1[j, i] * v
            out[1, j, i] = u2[j, i] * v
            out[2, j, i] = v * gx[j, i]
            out[3, j, i] = v * gy[j, i]
