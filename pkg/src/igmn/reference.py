"""Covariance-form learner: ``O(D^3)`` per point, kept as the ground truth.

Every step factorizes the covariance to get Mahalanobis distances and
recomputes the determinant densely.  Nothing here is optimized; the fast
learner is checked against it.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import DegenerateComponent, SkippedUpdate
from .model import Mixture, Representation, UpdateTrace, run_step
from .numerics import symmetrize


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(cov, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise DegenerateComponent(f"covariance is not positive definite: {exc}") from exc


def mahalanobis_dense(comp, x) -> float:
    """``(x - mu)^T Sigma^-1 (x - mu)`` through a Cholesky solve."""
    e = np.asarray(x, dtype=np.float64) - comp.mean
    L = _cholesky(comp.cov)
    z = linalg.solve_triangular(L, e, lower=True, check_finite=False)
    return float(z @ z)


def dense_log_det(cov: np.ndarray) -> float:
    L = _cholesky(cov)
    return float(2.0 * np.sum(np.log(np.diag(L))))


def covariance_update(comp, e_star, mean_shift, omega: float) -> None:
    """``Sigma <- (1-w) Sigma + w e* e*^T - dmu dmu^T`` and a dense determinant.

    Raises :class:`SkippedUpdate` (leaving the component untouched) when the
    result is not positive definite.
    """
    e_star = np.asarray(e_star, dtype=np.float64)
    mean_shift = np.asarray(mean_shift, dtype=np.float64)
    new = (
        (1.0 - omega) * comp.cov
        + omega * np.outer(e_star, e_star)
        - np.outer(mean_shift, mean_shift)
    )
    new = symmetrize(new)
    try:
        ld = dense_log_det(new)
    except DegenerateComponent:
        raise SkippedUpdate(float("nan"), "updated covariance is not positive definite")
    comp.matrix = new
    comp.log_det_cov = ld


def _update(comp, e, e_star, mean_shift, omega):
    covariance_update(comp, e_star, mean_shift, omega)


def step_reference(mix: Mixture, x) -> UpdateTrace:
    """Process one point with the covariance-form equations."""
    if mix.representation is not Representation.COVARIANCE:
        raise ValueError("step_reference needs a covariance-representation mixture")
    return run_step(mix, x, mahalanobis_dense, _update)
