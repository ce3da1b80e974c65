"""Conditional inference on a trained mixture.

Any subset of dimensions can be predicted from the rest.  Components posted
in precision form are conditioned through their precision blocks:

* conditional covariance of the targets = ``Lambda_t^-1``
* conditional mean = ``mu_t - Lambda_t^-1 Lambda_ti (x_i - mu_i)``
* known-block marginal: precision ``Lambda_i - Lambda_it Lambda_t^-1 Lambda_ti``,
  ``log|Sigma_i| = log|Sigma| + log|Lambda_t|``

so the only factorization is of the small ``o x o`` target block.
Covariance-form components use the textbook Schur-complement route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _backend
from .errors import ConfigError, DegenerateComponent
from .model import LOG_2PI, Mixture, Representation, _softmax_or_nearest


@dataclass(frozen=True)
class Partition:
    """Split of the dimensions into known inputs and targets to predict."""

    known_idx: tuple[int, ...]
    target_idx: tuple[int, ...]

    def __post_init__(self):
        known = tuple(int(i) for i in self.known_idx)
        target = tuple(int(i) for i in self.target_idx)
        object.__setattr__(self, "known_idx", known)
        object.__setattr__(self, "target_idx", target)
        if set(known) & set(target):
            raise ConfigError("known and target indices overlap")
        if len(set(known)) != len(known) or len(set(target)) != len(target):
            raise ConfigError("duplicate indices in partition")

    @classmethod
    def targets(cls, dimension: int, target_idx) -> "Partition":
        """Partition with the given targets and every other dimension known."""
        target = tuple(int(i) % dimension for i in np.atleast_1d(target_idx))
        known = tuple(i for i in range(dimension) if i not in target)
        return cls(known, target)

    @property
    def dimension(self) -> int:
        return len(self.known_idx) + len(self.target_idx)

    def check(self, D: int) -> None:
        if sorted(self.known_idx + self.target_idx) != list(range(D)):
            raise ConfigError(f"partition does not cover dimensions 0..{D - 1} exactly")

    @property
    def known(self) -> np.ndarray:
        return np.asarray(self.known_idx, dtype=np.int64)

    @property
    def target(self) -> np.ndarray:
        return np.asarray(self.target_idx, dtype=np.int64)


@dataclass
class Prediction:
    target_mean: np.ndarray
    target_cov: np.ndarray
    component_posteriors: np.ndarray
    component_means: np.ndarray
    component_covs: np.ndarray


def _chol(m: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise DegenerateComponent(f"{what} is not positive definite") from exc


def _known_vector(part: Partition, x_i) -> np.ndarray:
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    if x_i.shape != (len(part.known_idx),):
        raise ConfigError(
            f"expected {len(part.known_idx)} known values, got {x_i.shape[0]}"
        )
    return x_i


def _precision_blocks(comp, part: Partition):
    lam = comp.prec
    k, t = part.known, part.target
    return lam[np.ix_(k, k)], lam[np.ix_(t, k)], lam[np.ix_(t, t)]


def marginal_log_density(comp, part: Partition, x_i) -> float:
    """``log p(x_i | j)``: the component's Gaussian marginal on the known block."""
    part.check(comp.dimension)
    x_i = _known_vector(part, x_i)
    r = x_i - comp.mean[part.known]
    ni = r.size
    if comp.representation is Representation.PRECISION:
        lam_i, lam_ti, lam_t = _precision_blocks(comp, part)
        q = float(r @ (lam_i @ r))
        log_det = comp.log_det_cov
        if lam_t.size:
            L = _chol(lam_t, "target precision block")
            b = lam_ti @ r
            y = linalg.solve_triangular(L, b, lower=True, check_finite=False)
            q -= float(y @ y)
            log_det += 2.0 * float(np.sum(np.log(np.diag(L))))
    else:
        if ni == 0:
            return 0.0
        sig_i = comp.cov[np.ix_(part.known, part.known)]
        L = _chol(sig_i, "known covariance block")
        y = linalg.solve_triangular(L, r, lower=True, check_finite=False)
        q = float(y @ y)
        log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    if not math.isfinite(log_det):
        raise DegenerateComponent("marginal covariance determinant is not positive")
    return -0.5 * ni * LOG_2PI - 0.5 * log_det - 0.5 * q


def posterior_given_known(mix: Mixture, part: Partition, x_i) -> np.ndarray:
    """``p(j | x_i)`` for every component."""
    if mix.n_components == 0:
        raise ConfigError("posterior needs at least one component")
    terms = np.array([marginal_log_density(c, part, x_i) for c in mix.components])
    with np.errstate(divide="ignore"):
        terms = terms + np.log(mix.priors)
    return _softmax_or_nearest(terms)


def conditional_moments(comp, part: Partition, x_i):
    """Mean and covariance of the targets given the known values, for one component."""
    part.check(comp.dimension)
    x_i = _known_vector(part, x_i)
    r = x_i - comp.mean[part.known]
    mu_t = comp.mean[part.target]
    o = mu_t.size
    if o == 0:
        return mu_t.copy(), np.zeros((0, 0))
    if comp.representation is Representation.PRECISION:
        _, lam_ti, lam_t = _precision_blocks(comp, part)
        L = _chol(lam_t, "target precision block")
        cov = linalg.cho_solve((L, True), np.eye(o), check_finite=False)
        cov = 0.5 * (cov + cov.T)
        mean = mu_t - cov @ (lam_ti @ r)
        return mean, cov
    S = comp.cov
    sig_t = S[np.ix_(part.target, part.target)]
    if r.size == 0:
        return mu_t.copy(), sig_t.copy()
    sig_i = S[np.ix_(part.known, part.known)]
    sig_ti = S[np.ix_(part.target, part.known)]
    L = _chol(sig_i, "known covariance block")
    coef = linalg.cho_solve((L, True), sig_ti.T, check_finite=False).T
    mean = mu_t + coef @ r
    cov = sig_t - coef @ sig_ti.T
    return mean, 0.5 * (cov + cov.T)


def predict(mix: Mixture, part: Partition, x_i) -> Prediction:
    """Posterior-weighted conditional mean of the targets.

    ``target_cov`` is the covariance of the whole conditional mixture,
    ``sum_j p_j (C_j + m_j m_j^T) - m m^T``; the per-component conditional
    covariances ``C_j`` are kept in ``component_covs``.
    """
    post = posterior_given_known(mix, part, x_i)
    moments = [conditional_moments(c, part, x_i) for c in mix.components]
    means = np.array([m for m, _ in moments])
    covs = np.array([c for _, c in moments])
    mean = post @ means
    second = np.einsum("k,kab->ab", post, covs + np.einsum("ka,kb->kab", means, means))
    cov = second - np.outer(mean, mean)
    return Prediction(mean, 0.5 * (cov + cov.T), post, means, covs)


def classify(mix: Mixture, part: Partition, x_i, class_count: int | None = None):
    """``(label, scores)``: argmax over the predicted one-hot target block.

    Ties go to the lowest index.
    """
    scores = predict(mix, part, x_i).target_mean
    if class_count is not None and scores.size != class_count:
        raise ConfigError(f"target block has {scores.size} entries, expected {class_count}")
    return int(np.argmax(scores)), scores


# -- batch --------------------------------------------------------------------


def predict_many(mix: Mixture, part: Partition, X_known, backend: str | None = None):
    """Predict for every row of ``X_known``.

    Returns ``(means, covs, posteriors)`` with shapes ``(N, o)``,
    ``(N, o, o)`` and ``(N, K)``.  Precision-form mixtures use the compiled
    kernel when it is active.
    """
    return predict_many_with_distance(mix, part, X_known, backend)[:3]


def predict_many_with_distance(mix: Mixture, part: Partition, X_known,
                               backend: str | None = None):
    """Like :func:`predict_many`, plus each row's smallest squared
    Mahalanobis distance to a component's known-block marginal, shape ``(N,)``.
    """
    part.check(mix.dimension)
    if mix.n_components == 0:
        raise ConfigError("prediction needs at least one component")
    X = np.ascontiguousarray(X_known, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if len(part.known_idx) else X.reshape(-1, 0)
    if X.shape[1] != len(part.known_idx):
        raise ConfigError(f"expected {len(part.known_idx)} known columns, got {X.shape[1]}")
    N, K, o = X.shape[0], mix.n_components, len(part.target_idx)
    if mix.representation is Representation.PRECISION and _backend.resolve(backend) == "compiled":
        means = np.empty((N, o))
        covs = np.empty((N, o, o))
        post = np.empty((N, K))
        min_d2 = np.empty(N)
        status = _backend.compiled.precision_predict(
            mix.means, mix.matrices, mix.log_dets, mix.priors, K, X,
            part.known, part.target, means, covs, post, min_d2,
        )
        if status >= 0:
            raise DegenerateComponent(f"component {status}: target precision block is not positive definite")
        return means, covs, post, min_d2
    return _predict_many_numpy(mix, part, X)


def _predict_many_numpy(mix: Mixture, part: Partition, X: np.ndarray):
    N, K = X.shape[0], mix.n_components
    k_idx, t_idx = part.known, part.target
    ni, o = k_idx.size, t_idx.size
    terms = np.empty((N, K))
    dists = np.empty((N, K))
    cmeans = np.empty((K, N, o))
    ccovs = np.empty((K, o, o))
    for j, comp in enumerate(mix.components):
        R = X - comp.mean[k_idx]
        mu_t = comp.mean[t_idx]
        if comp.representation is Representation.PRECISION:
            lam_i, lam_ti, lam_t = _precision_blocks(comp, part)
            q = np.einsum("na,ab,nb->n", R, lam_i, R)
            log_det = comp.log_det_cov
            if o:
                L = _chol(lam_t, "target precision block")
                cov = linalg.cho_solve((L, True), np.eye(o), check_finite=False)
                cov = 0.5 * (cov + cov.T)
                B = R @ lam_ti.T
                U = B @ cov
                q = q - np.einsum("nt,nt->n", B, U)
                log_det += 2.0 * float(np.sum(np.log(np.diag(L))))
                cmeans[j] = mu_t - U
                ccovs[j] = cov
            else:
                cmeans[j] = np.empty((N, 0))
        else:
            S = comp.cov
            sig_t = S[np.ix_(t_idx, t_idx)]
            if ni:
                L = _chol(S[np.ix_(k_idx, k_idx)], "known covariance block")
                sig_ti = S[np.ix_(t_idx, k_idx)]
                Z = linalg.solve_triangular(L, R.T, lower=True, check_finite=False)
                q = np.einsum("an,an->n", Z, Z)
                log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
                coef = linalg.cho_solve((L, True), sig_ti.T, check_finite=False).T
                cmeans[j] = mu_t + R @ coef.T
                cov = sig_t - coef @ sig_ti.T
                ccovs[j] = 0.5 * (cov + cov.T)
            else:
                q = np.zeros(N)
                log_det = 0.0
                cmeans[j] = np.broadcast_to(mu_t, (N, o))
                ccovs[j] = sig_t
        dists[:, j] = q
        terms[:, j] = -0.5 * ni * LOG_2PI - 0.5 * log_det - 0.5 * q
    with np.errstate(divide="ignore"):
        terms += np.log(mix.priors)
    post = _softmax_rows(terms, dists)
    means = np.einsum("nk,knt->nt", post, cmeans)
    second = np.einsum("nk,ktu->ntu", post, ccovs) + np.einsum(
        "nk,knt,knu->ntu", post, cmeans, cmeans
    )
    covs = second - np.einsum("nt,nu->ntu", means, means)
    return means, covs, post, dists.min(axis=1)


def _softmax_rows(terms: np.ndarray, dists: np.ndarray) -> np.ndarray:
    top = terms.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    safe = np.where(np.isfinite(top), top, 0.0)
    w = np.exp(terms - safe)
    lse = safe + np.log(w.sum(axis=1, keepdims=True))
    with np.errstate(invalid="ignore"):
        post = np.exp(terms - lse)
    if dead.any():
        post[dead] = 0.0
        post[dead, np.argmin(dists[dead], axis=1)] = 1.0
    return post


def classify_many(mix: Mixture, part: Partition, X_known, backend: str | None = None) -> np.ndarray:
    means, _, _ = predict_many(mix, part, X_known, backend=backend)
    return np.argmax(means, axis=1)
