"""Small numerical kernels used by both learners.

Rank-one inverse and determinant updates, the chi-squared quantile that sets
the novelty threshold, quadratic forms and a max-shifted log-sum-exp.  All
functions are pure.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularUpdate

#: Largest probability handed to :func:`chi2_quantile`; anything above is clamped.
P_MAX = 1.0 - 1e-12

#: Sherman-Morrison denominators with ``|g|`` at or below this are singular.
SM_EPS = 1e-12

_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 2000


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _check_vec(M: np.ndarray, v: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if v.ndim != 1 or v.shape[0] != M.shape[0]:
        raise ValueError(
            f"vector of length {v.shape} does not match matrix order {M.shape[0]}"
        )


def quadratic_form(M, v) -> float:
    """Return ``v.T @ M @ v``."""
    M = np.asarray(M, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_vec(M, v)
    return float(v @ (M @ v))


def sm_rank_one(Ainv, u, c: float) -> np.ndarray:
    """Inverse of ``A + c u u^T`` given ``Ainv = A^-1`` (Sherman-Morrison).

    Raises :class:`SingularUpdate` when ``1 + c u^T Ainv u`` is within
    ``SM_EPS`` of zero.
    """
    Ainv = np.asarray(Ainv, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_vec(Ainv, u)
    w = Ainv @ u
    g = 1.0 + c * float(u @ w)
    if abs(g) <= SM_EPS:
        raise SingularUpdate(g)
    return symmetrize(Ainv - (c / g) * np.outer(w, w))


def det_rank_one(detA: float, Ainv, u, c: float) -> float:
    """Determinant of ``A + c u u^T`` from ``det(A)`` and ``A^-1``."""
    Ainv = np.asarray(Ainv, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_vec(Ainv, u)
    if detA == 0:
        raise ValueError("det_rank_one needs a nonsingular base matrix")
    return float(detA * (1.0 + c * float(u @ (Ainv @ u))))


def log_sum_exp(values) -> float:
    """``log(sum(exp(values)))`` with max shifting.

    Returns ``-inf`` when every entry is ``-inf``; callers decide what that
    means.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("log_sum_exp needs a non-empty 1-D array")
    m = float(np.max(v))
    if m == -math.inf:
        return -math.inf
    if m == math.inf:
        return math.inf
    return m + math.log(float(np.sum(np.exp(v - m))))


# -- regularized incomplete gamma -------------------------------------------


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized P(a, x) by its power series; good for x < a + 1."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized Q(a, x) by modified Lentz continued fraction; x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if x <= 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi2_cdf(q: float, dof: int) -> float:
    return gammainc_lower(0.5 * dof, 0.5 * q)


def chi2_sf(q: float, dof: int) -> float:
    return gammainc_upper(0.5 * dof, 0.5 * q)


def _chi2_logpdf(q: float, dof: int) -> float:
    a = 0.5 * dof
    return (a - 1.0) * math.log(q) - 0.5 * q - a * math.log(2.0) - math.lgamma(a)


def chi2_quantile(dof: int, p: float) -> float:
    """Quantile of the chi-squared distribution with ``dof`` degrees of freedom.

    Newton iteration on the regularized incomplete gamma, kept inside a
    shrinking bracket and falling back to bisection when a Newton step leaves
    it.  For ``p > 0.5`` the upper tail is solved instead so that
    probabilities close to one keep their precision.  ``p`` above ``P_MAX`` is
    clamped to ``P_MAX``.
    """
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof!r}")
    if not (0.0 <= p < 1.0):
        raise ValueError(f"probability must lie in [0, 1), got {p!r}")
    dof = int(dof)
    p = min(float(p), P_MAX)
    if p == 0.0:
        return 0.0

    upper = p > 0.5
    target = 1.0 - p if upper else p

    def resid(q):
        # positive when q is beyond the quantile
        if upper:
            return target - chi2_sf(q, dof)
        return chi2_cdf(q, dof) - target

    # Wilson-Hilferty starting point
    z = _normal_quantile(p)
    h = 2.0 / (9.0 * dof)
    q = dof * max(1.0 - h + z * math.sqrt(h), 1e-3) ** 3

    lo, hi = 0.0, max(q, 1.0)
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    if not (lo < q < hi):
        q = 0.5 * (lo + hi)

    for _ in range(200):
        r = resid(q)
        if r == 0.0:
            return q
        if r > 0.0:
            hi = q
        else:
            lo = q
        step = r / math.exp(_chi2_logpdf(q, dof))
        q_new = q - step
        if not (lo < q_new < hi):
            q_new = 0.5 * (lo + hi)
        if abs(q_new - q) <= 4e-16 * q_new or hi - lo <= 4e-16 * hi:
            return q_new
        q = q_new
    return q


def _normal_quantile(p: float) -> float:
    # Acklam's rational approximation; only a starting point for Newton.
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    if p < 0.02425:
        t = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / (
            (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
        )
    if p > 1.0 - 0.02425:
        t = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / (
            (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
        )
    t = p - 0.5
    r = t * t
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t / (
        ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    )
