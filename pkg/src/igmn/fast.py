"""Precision-form learner: rank-one precision and determinant updates.

The covariance update of one step collapses into a single rank-one term,

    Sigma(t) = (1 - w) Sigma(t-1) + c e e^T,   c = w (1 - 3w + w^2),

with ``e`` the error before the mean moves.  Sherman-Morrison and the matrix
determinant lemma turn that into ``O(D^2)`` updates of the precision and of
``log|Sigma|``; nothing reachable from :func:`step_fast` inverts, solves or
factorizes a ``D x D`` matrix.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SkippedUpdate
from .model import GUARD_EPS, Mixture, Representation, UpdateTrace, run_step
from .numerics import quadratic_form, sm_rank_one, symmetrize


def combined_coefficient(omega: float) -> float:
    return omega * (1.0 + omega * (omega - 3.0))


def mahalanobis_precision(comp, x) -> float:
    return quadratic_form(comp.prec, np.asarray(x, dtype=np.float64) - comp.mean)


def _guarded(comp, e, omega):
    v = comp.prec @ e
    c = combined_coefficient(omega)
    g = 1.0 + c / (1.0 - omega) * float(e @ v)
    if g <= GUARD_EPS:
        raise SkippedUpdate(g)
    return v, c, g


def precision_update_combined(comp, e, omega: float) -> None:
    """Single Sherman-Morrison step on the combined rank-one covariance update.

    ``Lambda <- Lambda/(1-w) - c/(1-w)^2 (Lambda e)(Lambda e)^T / g`` with
    ``g = 1 + c/(1-w) e^T Lambda e``.
    """
    e = np.asarray(e, dtype=np.float64)
    v, c, g = _guarded(comp, e, omega)
    one_m = 1.0 - omega
    comp.matrix = symmetrize(comp.prec / one_m - (c / (one_m * one_m) / g) * np.outer(v, v))


def precision_update_as_printed(comp, e, omega: float) -> None:
    """The combined update with a data-independent denominator.

    Test-only: this form is not the inverse of the combined covariance update
    and exists to demonstrate the disagreement.
    """
    e = np.asarray(e, dtype=np.float64)
    v = comp.prec @ e
    w = omega
    scale = w * (1.0 - 3.0 * w + w * w) / ((w - 1.0) ** 2 * (w * w - 2.0 * w - 1.0))
    comp.matrix = symmetrize(comp.prec / (1.0 - w) + scale * np.outer(v, v))


def precision_update_two_step(comp, e_star, mean_shift, omega: float) -> None:
    """Add ``w e* e*^T`` to the decayed covariance, then remove ``dmu dmu^T``,
    each through Sherman-Morrison.  Validation path; twice the work."""
    bar = sm_rank_one(comp.prec / (1.0 - omega), e_star, omega)
    comp.matrix = sm_rank_one(bar, mean_shift, -1.0)


def determinant_update_combined(comp, e, omega: float) -> None:
    """``|Sigma| <- (1-w)^D |Sigma| (1 + c/(1-w) e^T Lambda e)``, in log form.

    Must run before the precision update of the same step: it reads the
    previous precision.
    """
    e = np.asarray(e, dtype=np.float64)
    _, _, g = _guarded(comp, e, omega)
    comp.log_det_cov = comp.log_det_cov + comp.dimension * math.log1p(-omega) + math.log(g)


def determinant_update_two_step(comp, e_star, mean_shift, omega: float) -> None:
    e_star = np.asarray(e_star, dtype=np.float64)
    mean_shift = np.asarray(mean_shift, dtype=np.float64)
    a_inv = comp.prec / (1.0 - omega)
    f1 = 1.0 + omega * float(e_star @ (a_inv @ e_star))
    bar = sm_rank_one(a_inv, e_star, omega)
    f2 = 1.0 - float(mean_shift @ (bar @ mean_shift))
    if f1 <= 0.0 or f2 <= 0.0:
        raise SkippedUpdate(f1 * f2)
    comp.log_det_cov = (
        comp.log_det_cov + comp.dimension * math.log1p(-omega) + math.log(f1) + math.log(f2)
    )


def _update(comp, e, e_star, mean_shift, omega):
    determinant_update_combined(comp, e, omega)
    precision_update_combined(comp, e, omega)


def step_fast(mix: Mixture, x) -> UpdateTrace:
    """Process one point with precision-form distances and rank-one updates."""
    if mix.representation is not Representation.PRECISION:
        raise ValueError("step_fast needs a precision-representation mixture")
    return run_step(mix, x, mahalanobis_precision, _update)
