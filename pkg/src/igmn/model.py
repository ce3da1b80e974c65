"""Mixture state shared by the reference and fast learners.

A :class:`Mixture` keeps its components in stacked arrays (one row or
matrix slice per component) so that the compiled kernels can walk them
without any per-component Python objects.  :class:`GaussianComponent` is a
thin view over one slot of that storage; it stays valid until the next
creation or pruning changes the slot layout.

Determinants are tracked as ``log|Sigma|``.  ``det_cov`` is exposed as a
derived property, but in high dimension the plain determinant under- or
overflows long before the log does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DegenerateComponent, SkippedUpdate
from .numerics import P_MAX, chi2_quantile, log_sum_exp, symmetrize

LOG_2PI = math.log(2.0 * math.pi)

#: Floor applied to per-dimension standard deviations.
STD_FLOOR = 1e-9

#: Guard on ``1 + c/(1-w) * d2``; at or below it the matrix update is skipped.
GUARD_EPS = 1e-8

#: The default novelty parameter: the smallest positive double.
DEFAULT_BETA = 5e-324


class Representation(str, Enum):
    COVARIANCE = "covariance"
    PRECISION = "precision"


def novelty_threshold(dimension: int, beta: float) -> float:
    """Squared-distance threshold ``chi2_{D, 1-beta}``; ``+inf`` when beta is 0."""
    if beta == 0.0:
        return math.inf
    return chi2_quantile(dimension, min(1.0 - beta, P_MAX))


@dataclass
class LearnerConfig:
    """Hyperparameters of one mixture.

    ``dataset_std`` is the per-dimension spread estimate that scales the
    initial covariance of every new component (``sigma_ini = delta * std``).
    """

    dataset_std: np.ndarray
    delta: float = 0.5
    beta: float = DEFAULT_BETA
    v_min: int = 5
    sp_min: float = 3.0
    pruning_enabled: bool = True
    representation: Representation = Representation.PRECISION
    chi2_threshold: float = field(init=False)

    def __post_init__(self):
        std = np.array(self.dataset_std, dtype=np.float64).ravel()
        if std.size == 0:
            raise ConfigError("dataset_std must have at least one entry")
        if not np.all(np.isfinite(std)) or np.any(std < 0):
            raise ConfigError("dataset_std entries must be finite and nonnegative")
        self.dataset_std = np.maximum(std, STD_FLOOR)
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError(f"delta must be positive, got {self.delta!r}")
        if not (0.0 <= self.beta < 1.0):
            raise ConfigError(f"beta must lie in [0, 1), got {self.beta!r}")
        if int(self.v_min) != self.v_min or self.v_min < 1:
            raise ConfigError(f"v_min must be a positive integer, got {self.v_min!r}")
        self.v_min = int(self.v_min)
        if not self.sp_min > 0:
            raise ConfigError(f"sp_min must be positive, got {self.sp_min!r}")
        self.representation = Representation(self.representation)
        self.chi2_threshold = novelty_threshold(self.dimension, self.beta)

    @property
    def dimension(self) -> int:
        return int(self.dataset_std.shape[0])

    @property
    def sigma_ini(self) -> np.ndarray:
        return self.delta * self.dataset_std

    @classmethod
    def from_data(cls, X, **kwargs) -> "LearnerConfig":
        """Build a config whose ``dataset_std`` is the population std of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ConfigError("from_data needs a non-empty 2-D array")
        return cls(dataset_std=X.std(axis=0), **kwargs)


class _Slots:
    """Growable stacked arrays backing a set of components."""

    def __init__(self, dimension: int, representation: Representation, capacity: int = 4):
        self.dimension = dimension
        self.representation = Representation(representation)
        self.size = 0
        self._alloc(max(capacity, 1))

    def _alloc(self, cap):
        D = self.dimension
        self.means = np.zeros((cap, D))
        self.mats = np.zeros((cap, D, D))
        self.log_det = np.zeros(cap)
        self.sp = np.zeros(cap)
        self.age = np.zeros(cap, dtype=np.int64)
        self.prior = np.zeros(cap)

    @property
    def capacity(self) -> int:
        return self.means.shape[0]

    def append(self) -> int:
        if self.size == self.capacity:
            old = (self.means, self.mats, self.log_det, self.sp, self.age, self.prior)
            self._alloc(2 * self.capacity)
            for new, prev in zip(
                (self.means, self.mats, self.log_det, self.sp, self.age, self.prior), old
            ):
                new[: self.size] = prev[: self.size]
        k = self.size
        self.size += 1
        return k

    def remove(self, ids) -> None:
        keep = np.setdiff1d(np.arange(self.size), np.asarray(ids, dtype=np.int64))
        n = keep.size
        for arr in (self.means, self.mats, self.log_det, self.sp, self.age, self.prior):
            arr[:n] = arr[keep]
        self.size = n


class GaussianComponent:
    """View of one component: mean, covariance *or* precision, log-determinant,
    accumulator ``sp``, age and prior."""

    __slots__ = ("_slots", "_k")

    def __init__(self, slots: _Slots, k: int):
        self._slots = slots
        self._k = k

    @classmethod
    def create(
        cls,
        mean,
        *,
        cov=None,
        prec=None,
        det_cov=None,
        log_det_cov=None,
        sp=1.0,
        age=1,
        prior=1.0,
    ) -> "GaussianComponent":
        """Standalone component, not attached to a mixture.

        Exactly one of ``cov`` / ``prec`` must be given.  The determinant of
        the covariance defaults to the dense value when not supplied.
        """
        mean = np.asarray(mean, dtype=np.float64).ravel()
        if (cov is None) == (prec is None):
            raise ConfigError("give exactly one of cov or prec")
        rep = Representation.COVARIANCE if cov is not None else Representation.PRECISION
        mat = np.array(cov if cov is not None else prec, dtype=np.float64)
        if mat.shape != (mean.size, mean.size):
            raise ConfigError(f"matrix shape {mat.shape} does not match mean of length {mean.size}")
        if log_det_cov is None:
            if det_cov is not None:
                log_det_cov = math.log(det_cov) if det_cov > 0 else -math.inf
            else:
                sign, ld = np.linalg.slogdet(mat)
                log_det_cov = ld if rep is Representation.COVARIANCE else -ld
                if sign <= 0:
                    log_det_cov = -math.inf
        slots = _Slots(mean.size, rep, capacity=1)
        k = slots.append()
        slots.means[k] = mean
        slots.mats[k] = mat
        slots.log_det[k] = log_det_cov
        slots.sp[k] = sp
        slots.age[k] = age
        slots.prior[k] = prior
        return cls(slots, k)

    @property
    def dimension(self) -> int:
        return self._slots.dimension

    @property
    def representation(self) -> Representation:
        return self._slots.representation

    @property
    def mean(self) -> np.ndarray:
        return self._slots.means[self._k]

    @mean.setter
    def mean(self, value):
        self._slots.means[self._k] = value

    @property
    def matrix(self) -> np.ndarray:
        """The stored matrix, covariance or precision depending on representation."""
        return self._slots.mats[self._k]

    @matrix.setter
    def matrix(self, value):
        self._slots.mats[self._k] = value

    @property
    def cov(self):
        if self.representation is Representation.COVARIANCE:
            return self.matrix
        return None

    @property
    def prec(self):
        if self.representation is Representation.PRECISION:
            return self.matrix
        return None

    @property
    def log_det_cov(self) -> float:
        return float(self._slots.log_det[self._k])

    @log_det_cov.setter
    def log_det_cov(self, value):
        self._slots.log_det[self._k] = value

    @property
    def det_cov(self) -> float:
        return math.exp(self.log_det_cov)

    @property
    def sp(self) -> float:
        return float(self._slots.sp[self._k])

    @sp.setter
    def sp(self, value):
        self._slots.sp[self._k] = value

    @property
    def age(self) -> int:
        return int(self._slots.age[self._k])

    @age.setter
    def age(self, value):
        self._slots.age[self._k] = value

    @property
    def prior(self) -> float:
        return float(self._slots.prior[self._k])

    @prior.setter
    def prior(self, value):
        self._slots.prior[self._k] = value

    def covariance(self) -> np.ndarray:
        """Dense covariance (inverts the precision when necessary)."""
        if self.representation is Representation.COVARIANCE:
            return self.matrix.copy()
        return symmetrize(np.linalg.inv(self.matrix))

    def precision(self) -> np.ndarray:
        if self.representation is Representation.PRECISION:
            return self.matrix.copy()
        return symmetrize(np.linalg.inv(self.matrix))

    def __repr__(self):
        return (
            f"GaussianComponent(mean={self.mean!r}, log_det_cov={self.log_det_cov:.6g}, "
            f"sp={self.sp:.6g}, age={self.age}, prior={self.prior:.6g})"
        )


class Mixture:
    """Ordered set of Gaussian components plus the learner configuration.

    No training data is retained: storage is ``O(K D^2)`` however many points
    were seen.
    """

    def __init__(self, config: LearnerConfig):
        self.config = config
        self._slots = _Slots(config.dimension, config.representation)
        self.skipped_updates = 0
        self.n_updates = 0
        self.n_created = 0
        self.n_pruned = 0

    @property
    def dimension(self) -> int:
        return self.config.dimension

    @property
    def representation(self) -> Representation:
        return self.config.representation

    @property
    def n_components(self) -> int:
        return self._slots.size

    def __len__(self):
        return self._slots.size

    def __getitem__(self, k: int) -> GaussianComponent:
        if not -self.n_components <= k < self.n_components:
            raise IndexError(k)
        return GaussianComponent(self._slots, k % self.n_components)

    def __iter__(self):
        return iter(self.components)

    @property
    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(self._slots, k) for k in range(self._slots.size)]

    # stacked views, trimmed to the live components
    @property
    def means(self) -> np.ndarray:
        return self._slots.means[: self._slots.size]

    @property
    def matrices(self) -> np.ndarray:
        return self._slots.mats[: self._slots.size]

    @property
    def log_dets(self) -> np.ndarray:
        return self._slots.log_det[: self._slots.size]

    @property
    def sps(self) -> np.ndarray:
        return self._slots.sp[: self._slots.size]

    @property
    def ages(self) -> np.ndarray:
        return self._slots.age[: self._slots.size]

    @property
    def priors(self) -> np.ndarray:
        return self._slots.prior[: self._slots.size]

    def copy(self) -> "Mixture":
        other = Mixture(self.config)
        for comp in self.components:
            k = other._slots.append()
            s, o = self._slots, other._slots
            o.means[k] = comp.mean
            o.mats[k] = comp.matrix
            o.log_det[k] = s.log_det[comp._k]
            o.sp[k] = s.sp[comp._k]
            o.age[k] = s.age[comp._k]
            o.prior[k] = s.prior[comp._k]
        other.skipped_updates = self.skipped_updates
        other.n_updates = self.n_updates
        other.n_created = self.n_created
        other.n_pruned = self.n_pruned
        return other

    def __repr__(self):
        return (
            f"Mixture(K={self.n_components}, D={self.dimension}, "
            f"representation={self.representation.value})"
        )


@dataclass
class UpdateTrace:
    """Transient quantities of one learning step, one row per component.

    On a creation step only ``d2`` (distances to the pre-existing
    components), ``created`` / ``created_id`` and ``pruned_ids`` are filled.
    """

    d2: np.ndarray
    created: bool = False
    created_id: int | None = None
    log_density: np.ndarray | None = None
    responsibility: np.ndarray | None = None
    error_before: np.ndarray | None = None
    error_after: np.ndarray | None = None
    mean_shift: np.ndarray | None = None
    omega: np.ndarray | None = None
    coeff_c: np.ndarray | None = None
    guard_g: np.ndarray | None = None
    skipped: np.ndarray | None = None
    pruned_ids: list[int] = field(default_factory=list)

    @property
    def updated(self) -> bool:
        return not self.created


# -- operations ---------------------------------------------------------------


def log_density(comp: GaussianComponent, d2: float, D: int | None = None) -> float:
    """Log of the Gaussian density at squared Mahalanobis distance ``d2``."""
    if D is None:
        D = comp.dimension
    ld = comp.log_det_cov
    if not math.isfinite(ld):
        raise DegenerateComponent(f"covariance determinant is not positive (log det {ld})")
    return -0.5 * D * LOG_2PI - 0.5 * ld - 0.5 * d2


def responsibilities(mix: Mixture, log_densities, d2=None) -> np.ndarray:
    """Posterior over components: softmax of ``log p(x|j) + log p(j)``.

    If every term is ``-inf`` the component with the smallest ``d2`` takes
    all the responsibility (the first one when ``d2`` is not given).
    """
    ld = np.asarray(log_densities, dtype=np.float64)
    if ld.shape != (mix.n_components,) or ld.size == 0:
        raise ValueError("need one log density per component and at least one component")
    with np.errstate(divide="ignore"):
        terms = ld + np.log(mix.priors)
    return _softmax_or_nearest(terms, d2)


def _softmax_or_nearest(terms: np.ndarray, d2=None) -> np.ndarray:
    lse = log_sum_exp(terms)
    if lse == -math.inf:
        out = np.zeros(terms.size)
        out[0 if d2 is None else int(np.argmin(d2))] = 1.0
        return out
    return np.exp(terms - lse)


def novelty_check(d2, threshold: float) -> bool:
    """True when some component is close enough to absorb the point."""
    d2 = np.asarray(d2, dtype=np.float64)
    return bool(d2.size) and bool(np.any(d2 < threshold))


def renormalize_priors(mix: Mixture) -> None:
    sp = mix.sps
    if sp.size:
        mix.priors[:] = sp / sp.sum()


def create_component(mix: Mixture, x) -> int:
    """Append a component centred on ``x`` and renormalize all priors."""
    x = np.asarray(x, dtype=np.float64)
    cfg = mix.config
    if x.shape != (cfg.dimension,):
        raise ConfigError(f"point of shape {x.shape} does not match dimension {cfg.dimension}")
    sigma = cfg.sigma_ini
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ConfigError("initial standard deviations must be positive and finite")
    var = sigma * sigma
    slots = mix._slots
    k = slots.append()
    slots.means[k] = x
    slots.mats[k] = 0.0
    if mix.representation is Representation.PRECISION:
        np.fill_diagonal(slots.mats[k], 1.0 / var)
    else:
        np.fill_diagonal(slots.mats[k], var)
    slots.log_det[k] = float(np.sum(np.log(var)))
    slots.sp[k] = 1.0
    slots.age[k] = 1
    renormalize_priors(mix)
    mix.n_created += 1
    return k


def prune(mix: Mixture) -> list[int]:
    """Remove every component older than ``v_min`` whose ``sp`` is below ``sp_min``.

    Returns the removed indices (as they were before removal).
    """
    cfg = mix.config
    if not cfg.pruning_enabled or mix.n_components == 0:
        return []
    doomed = np.flatnonzero((mix.ages > cfg.v_min) & (mix.sps < cfg.sp_min))
    if doomed.size == 0:
        return []
    mix._slots.remove(doomed)
    renormalize_priors(mix)
    mix.n_pruned += int(doomed.size)
    return [int(i) for i in doomed]


def evict_weakest(mix: Mixture) -> int:
    """Remove the component with the smallest ``sp`` (the oldest on ties)."""
    if mix.n_components == 0:
        raise ConfigError("cannot evict from an empty mixture")
    k = int(np.argmin(mix.sps))
    mix._slots.remove(np.array([k]))
    renormalize_priors(mix)
    mix.n_pruned += 1
    return k


def run_step(mix: Mixture, x, distance, update_matrix) -> UpdateTrace:
    """One learning step with learner-specific distance and matrix update.

    ``distance(comp, x)`` returns the squared Mahalanobis distance;
    ``update_matrix(comp, e, e_star, mean_shift, omega)`` applies the
    covariance or precision update and may raise :class:`SkippedUpdate`.
    The shared guard ``1 + c/(1-w) * d2 > GUARD_EPS`` is checked here, before
    the learner-specific update is attempted.
    """
    cfg = mix.config
    D = cfg.dimension
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (D,):
        raise ConfigError(f"point of shape {x.shape} does not match dimension {D}")
    comps = mix.components
    d2 = np.array([distance(comp, x) for comp in comps], dtype=np.float64)

    if not novelty_check(d2, cfg.chi2_threshold):
        k = create_component(mix, x)
        trace = UpdateTrace(d2=d2, created=True, created_id=k)
        trace.pruned_ids = prune(mix)
        return trace

    K = len(comps)
    logd = np.array([log_density(comp, d, D) for comp, d in zip(comps, d2)])
    resp = responsibilities(mix, logd, d2)
    e_before = np.empty((K, D))
    e_after = np.empty((K, D))
    shift = np.empty((K, D))
    omega = np.empty(K)
    coeff = np.empty(K)
    guard = np.empty(K)
    skipped = np.zeros(K, dtype=bool)

    for k, comp in enumerate(comps):
        r = resp[k]
        comp.age = comp.age + 1
        sp = comp.sp + r
        comp.sp = sp
        e = x - comp.mean
        w = r / sp
        dmu = w * e
        comp.mean = comp.mean + dmu
        e_star = x - comp.mean
        c = w * (1.0 + w * (w - 3.0))
        g = 1.0 + c / (1.0 - w) * d2[k]
        if g <= GUARD_EPS:
            skipped[k] = True
        else:
            try:
                update_matrix(comp, e, e_star, dmu, w)
            except SkippedUpdate:
                skipped[k] = True
        e_before[k], e_after[k], shift[k] = e, e_star, dmu
        omega[k], coeff[k], guard[k] = w, c, g

    renormalize_priors(mix)
    mix.n_updates += 1
    mix.skipped_updates += int(skipped.sum())
    trace = UpdateTrace(
        d2=d2,
        log_density=logd,
        responsibility=resp,
        error_before=e_before,
        error_after=e_after,
        mean_shift=shift,
        omega=omega,
        coeff_c=coeff,
        guard_g=guard,
        skipped=skipped,
    )
    trace.pruned_ids = prune(mix)
    return trace
