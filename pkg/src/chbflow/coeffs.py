"""Variable-step BDF differentiation and extrapolation weights, orders 1-4.

For stamps ``t[0] > t[1] > ... > t[k]`` (newest first, ``t[0]`` the new
level) the time derivative at ``t[0]`` is approximated as

    v'(t[0]) ~ (alpha * v[0] - sum_j a[j] * v[j+1]) / (t[0] - t[1])

and the value at ``t[0]`` is extrapolated as ``sum_j b[j] * v[j+1]``. Both
come from Lagrange interpolation through the stamps, so the derivative is
exact for polynomials of degree <= k and the extrapolation for degree <= k-1.
"""

from dataclasses import dataclass

import numpy as np

MAX_ORDER = 4


@dataclass(frozen=True)
class BdfCoeffs:
    order: int
    alpha: float
    a_weights: tuple
    b_weights: tuple
    times: tuple

    @property
    def tau(self):
        return self.times[0] - self.times[1]


def _lagrange_derivative_at_first(t):
    """Derivative weights of the Lagrange interpolant through ``t`` at ``t[0]``."""
    k = len(t) - 1
    w = np.zeros(k + 1)
    # basis 0: sum of 1/(t0 - tm)
    w[0] = sum(1.0 / (t[0] - t[m]) for m in range(1, k + 1))
    for j in range(1, k + 1):
        num = 1.0
        for m in range(1, k + 1):
            if m != j:
                num *= t[0] - t[m]
        den = 1.0
        for m in range(k + 1):
            if m != j:
                den *= t[j] - t[m]
        w[j] = num / den
    return w


def _lagrange_values_at(t_eval, t):
    w = np.ones(len(t))
    for j in range(len(t)):
        for m in range(len(t)):
            if m != j:
                w[j] *= (t_eval - t[m]) / (t[j] - t[m])
    return w


def bdf_weights(k, times):
    """Weights for order ``k`` given ``k + 1`` stamps.

    ``times`` may be given oldest-first or newest-first; it must be strictly
    monotone and is stored newest first ``(t^{n+1}, t^n, ..., t^{n-k+1})``.
    """
    k = int(k)
    if k < 1 or k > MAX_ORDER:
        raise ValueError(f"unsupported BDF order {k}")
    t = [float(x) for x in times]
    if len(t) != k + 1:
        raise ValueError(f"order {k} needs {k + 1} stamps, got {len(t)}")
    if t[0] < t[-1]:
        t = t[::-1]
    if any(t[i] <= t[i + 1] for i in range(k)):
        raise ValueError(f"stamps must be strictly increasing: {times}")
    tau = t[0] - t[1]
    d = _lagrange_derivative_at_first(t) * tau
    b = _lagrange_values_at(t[0], t[1:])
    return BdfCoeffs(order=k, alpha=float(d[0]),
                     a_weights=tuple(float(-x) for x in d[1:]),
                     b_weights=tuple(float(x) for x in b),
                     times=tuple(t))


def combine(weights, values):
    """``sum_j weights[j] * values[j]`` for scalars or equally shaped arrays."""
    if len(weights) != len(values):
        raise ValueError(f"{len(weights)} weights for {len(values)} values")
    out = weights[0] * values[0]
    for w, v in zip(weights[1:], values[1:]):
        out = out + w * v
    return out


def extrapolate(coeffs, history):
    """Extrapolate a newest-first history of ``k`` values to ``t^{n+1}``."""
    return combine(coeffs.b_weights, history)


def backdiff(coeffs, new, history):
    """Variable-step BDF approximation of the derivative at ``t^{n+1}``."""
    return (coeffs.alpha * new - combine(coeffs.a_weights, history)) / coeffs.tau
