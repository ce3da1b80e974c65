"""k-fold evaluation of a learner on a tabular dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, column_stats, one_hot, stratified_kfold
from .errors import ConfigError
from .inference import Partition, predict_many
from .model import LearnerConfig, Mixture, Representation
from .train import learn

LEARNERS = {"fast": Representation.PRECISION, "reference": Representation.COVARIANCE}


def representation_for(learner: str) -> Representation:
    try:
        return LEARNERS[learner]
    except KeyError:
        raise ConfigError(f"unknown learner {learner!r}; choose from {sorted(LEARNERS)}") from None


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    score: float
    components: int


@dataclass
class CVReport:
    """Per-fold scores; ``metric`` is ``"accuracy"`` or ``"rmse"``."""

    metric: str
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def scores(self) -> np.ndarray:
        return np.array([f.score for f in self.folds])

    @property
    def components(self) -> np.ndarray:
        return np.array([f.components for f in self.folds], dtype=np.float64)

    @property
    def mean(self) -> float:
        return float(self.scores.mean())

    @property
    def std(self) -> float:
        return float(self.scores.std())

    @property
    def mean_components(self) -> float:
        return float(self.components.mean())


def fit(X, *, learner: str = "fast", backend: str | None = None, **config) -> Mixture:
    """Train a fresh mixture on the rows of ``X`` in the order given."""
    X = np.asarray(X, dtype=np.float64)
    cfg = LearnerConfig.from_data(X, representation=representation_for(learner), **config)
    return learn(Mixture(cfg), X, backend=backend)


def cross_validate(
    ds: Dataset,
    folds: int = 10,
    seed: int = 0,
    *,
    learner: str = "fast",
    target: str | None = None,
    standardize: bool = False,
    backend: str | None = None,
    **config,
) -> CVReport:
    """Stratified k-fold evaluation.

    With a class column the one-hot block is appended and predicted from the
    features (accuracy).  Otherwise the column named ``target`` (default: the
    last one) is regressed on the rest (RMSE).  Each fold trains on its rows
    in the plan's shuffled order; the spread estimate comes from the training
    rows only.
    """
    plan = stratified_kfold(ds, folds, seed)
    classify = ds.labels is not None
    if classify:
        work = one_hot(ds)
        t_idx = list(work.onehot_idx)
    else:
        work = ds
        t_idx = [work.column_index(target) if target is not None else work.n_columns - 1]
    part = Partition.targets(work.n_columns, t_idx)
    report = CVReport("accuracy" if classify else "rmse")
    values = work.values
    for k in range(folds):
        train_rows, test_rows = plan.split(k)
        Xtr, Xte = values[train_rows], values[test_rows]
        if standardize:
            Xtr, Xte = _standardize(Xtr, Xte, part)
        mix = fit(Xtr, learner=learner, backend=backend, **config)
        means, _, _ = predict_many(mix, part, Xte[:, part.known], backend=backend)
        if classify:
            score = float(np.mean(np.argmax(means, axis=1) == ds.labels[test_rows]))
        else:
            score = math.sqrt(float(np.mean((means - Xte[:, part.target]) ** 2)))
        report.folds.append(FoldResult(k, len(train_rows), len(test_rows), score, mix.n_components))
    return report


def _standardize(Xtr, Xte, part):
    # only the known columns; targets keep their units
    stats = column_stats(Dataset(Xtr, tuple(str(i) for i in range(Xtr.shape[1]))))
    idx = part.known
    Xtr, Xte = Xtr.copy(), Xte.copy()
    Xtr[:, idx] = (Xtr[:, idx] - stats.mean[idx]) / stats.std[idx]
    Xte[:, idx] = (Xte[:, idx] - stats.mean[idx]) / stats.std[idx]
    return Xtr, Xte
