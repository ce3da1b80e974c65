"""Scaling benchmark: training and prediction time against dimensionality.

Each cell trains one learner on points drawn from a single Gaussian, then
predicts the last dimension of held-out points from the others.  With
``beta = 0`` exactly one component exists, so the per-point cost is the
matrix work alone and the log-log slope of time against dimension exposes
the asymptotic order of each learner.
"""

from __future__ import annotations

import csv
import io
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .data import Dataset
from .errors import ConfigError
from .evaluate import LEARNERS, representation_for
from .inference import Partition, predict_many
from .model import LearnerConfig, Mixture
from .train import learn

ROTATION_MAX_DIM = 64
CSV_COLUMNS = ("dim", "learner", "train_seconds", "test_seconds", "component_count")


@dataclass
class ScalingConfig:
    dims: list[int] = field(default_factory=lambda: [2**i for i in range(9)])
    n_points: int = 1000
    train_fraction: float = 0.9
    seed: int = 0
    learners: tuple[str, ...] = ("reference", "fast")
    delta: float = 1.0
    beta: float = 0.0
    repeats: int = 3
    backend: str | None = None

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        if not self.dims or any(d < 1 for d in self.dims):
            raise ConfigError("dims must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.dims, self.dims[1:])):
            raise ConfigError("dims must be strictly increasing")
        if not self.learners:
            raise ConfigError("at least one learner is required")
        for name in self.learners:
            representation_for(name)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        n_train = int(round(self.n_points * self.train_fraction))
        if n_train < 1 or n_train >= self.n_points:
            raise ConfigError("n_points too small for the train/test split")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")

    @property
    def n_train(self) -> int:
        return int(round(self.n_points * self.train_fraction))


@dataclass(frozen=True)
class ScalingRow:
    dim: int
    learner: str
    train_seconds: float
    test_seconds: float
    component_count: int


def gen_gaussian_dataset(dim: int, n: int, seed: int) -> Dataset:
    """``n`` samples from one random Gaussian in ``dim`` dimensions.

    Axis scales (standard deviations) are uniform in [0.5, 2]; the axes are
    randomly rotated when ``dim <= 64`` and left aligned beyond that.
    """
    if dim < 1 or n < 1:
        raise ConfigError("dim and n must be positive")
    rng = np.random.default_rng([int(seed), int(dim)])
    mean = rng.normal(0.0, 1.0, dim)
    scales = rng.uniform(0.5, 2.0, dim)
    Z = rng.standard_normal((n, dim)) * scales
    if dim <= ROTATION_MAX_DIM:
        Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
        Q *= np.sign(np.diag(R))
        Z = Z @ Q.T
    return Dataset(mean + Z, tuple(f"x{i}" for i in range(dim)))


def run_cell(cfg: ScalingConfig, ds: Dataset, learner: str):
    """Time one learner on one dataset.

    Returns ``(row, predictions)``; timings are medians over ``cfg.repeats``.
    """
    X = ds.values
    D = X.shape[1]
    Xtr, Xte = X[: cfg.n_train], X[cfg.n_train :]
    part = Partition.targets(D, [D - 1])
    config = LearnerConfig.from_data(
        Xtr, delta=cfg.delta, beta=cfg.beta, representation=representation_for(learner)
    )
    Xin = np.ascontiguousarray(Xte[:, part.known])
    train_t, test_t = [], []
    for _ in range(cfg.repeats):
        mix = Mixture(config)
        t0 = time.perf_counter()
        learn(mix, Xtr, backend=cfg.backend)
        t1 = time.perf_counter()
        means, _, _ = predict_many(mix, part, Xin, backend=cfg.backend)
        t2 = time.perf_counter()
        train_t.append(t1 - t0)
        test_t.append(t2 - t1)
    row = ScalingRow(D, learner, statistics.median(train_t), statistics.median(test_t), mix.n_components)
    return row, means[:, 0]


def run_scaling(cfg: ScalingConfig, progress=None) -> list[ScalingRow]:
    """Run every ``dim x learner`` cell; ``progress(row)`` is called after each."""
    rows = []
    for dim in cfg.dims:
        ds = gen_gaussian_dataset(dim, cfg.n_points, cfg.seed)
        for learner in cfg.learners:
            row, _ = run_cell(cfg, ds, learner)
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def fit_exponent(rows, min_dim: int = 32) -> float:
    """Least-squares slope of ``log(train_seconds)`` against ``log(dim)``.

    Only rows with ``dim >= min_dim`` count; at least four are required.
    """
    use = [r for r in rows if r.dim >= min_dim]
    if len(use) < 4:
        raise ConfigError(f"need at least 4 rows with dim >= {min_dim}, got {len(use)}")
    learners = {r.learner for r in use}
    if len(learners) > 1:
        raise ConfigError(f"rows mix learners {sorted(learners)}; fit one learner at a time")
    x = np.log([r.dim for r in use])
    y = np.log([r.train_seconds for r in use])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def exponents(rows, min_dim: int = 32) -> dict[str, float]:
    """``fit_exponent`` per learner present in ``rows``."""
    out = {}
    for name in LEARNERS:
        sub = [r for r in rows if r.learner == name]
        if sub:
            out[name] = fit_exponent(sub, min_dim)
    return out


def write_rows(rows, fh=None) -> str | None:
    """Write rows as CSV to ``fh``; returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.dim, r.learner, repr(r.train_seconds), repr(r.test_seconds), r.component_count])
    return buf.getvalue() if fh is None else None


@dataclass(frozen=True)
class BackendRow:
    dim: int
    backend: str
    train_seconds: float
    test_seconds: float


def compare_backends(dims=(4, 16, 64), n_points: int = 500, seed: int = 0, learner: str = "fast",
                     repeats: int = 3) -> list[BackendRow]:
    """Time the compiled and pure-Python backends on the same cells."""
    out = []
    for dim in dims:
        ds = gen_gaussian_dataset(dim, n_points, seed)
        for backend in _backend.available():
            cfg = ScalingConfig(dims=[dim], n_points=n_points, seed=seed, learners=(learner,),
                                repeats=repeats, backend=backend)
            row, _ = run_cell(cfg, ds, learner)
            out.append(BackendRow(dim, backend, row.train_seconds, row.test_seconds))
    return out


def main(argv=None):  # pragma: no cover - thin script wrapper
    cfg = ScalingConfig()
    rows = run_scaling(cfg, progress=lambda r: print(r, file=sys.stderr))
    write_rows(rows, sys.stdout)
    for name, slope in exponents(rows).items():
        print(f"# {name} slope {slope:.3f}", file=sys.stderr)


if __name__ == "__main__":  # pragma: no cover
    main()
