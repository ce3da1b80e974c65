"""Tabular data: CSV I/O, column statistics, one-hot class encoding and
stratified k-fold plans."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .model import STD_FLOOR


@dataclass(frozen=True)
class Dataset:
    """Numeric table with an optional label-encoded class column.

    The class column is held apart from ``values`` as integer ``labels``
    indexing ``class_labels``.  After :func:`one_hot`, ``onehot_idx`` lists the
    indicator columns appended to ``values``.
    """

    values: np.ndarray
    columns: tuple[str, ...]
    labels: np.ndarray | None = None
    class_labels: tuple[str, ...] = ()
    class_name: str | None = None
    onehot_idx: tuple[int, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ConfigError("a dataset needs a 2-D array with at least one row")
        if v.shape[1] != len(self.columns):
            raise ConfigError("column names do not match the number of columns")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (v.shape[0],):
                raise ConfigError("one label per row required")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def feature_idx(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_columns) if i not in self.onehot_idx)

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise ConfigError(f"no column named {name!r}") from None

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else self.labels[rows]
        return replace(self, values=self.values[rows], labels=labels)


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    """Fold assignment of every row plus the shuffled presentation order."""

    assignments: np.ndarray
    order: np.ndarray
    folds: int
    seed: int

    def split(self, k: int):
        """``(train_rows, test_rows)`` for fold ``k``, both in shuffled order."""
        if not 0 <= k < self.folds:
            raise IndexError(k)
        in_fold = self.assignments[self.order] == k
        return self.order[~in_fold], self.order[in_fold]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.folds)


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {cell!r}", row=row, column=column)
    return value


def load_csv(path, class_column: str | None = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Every cell must be numeric except those of ``class_column``, whose
    distinct values become the class labels (sorted, then label-encoded).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _read_table(csv.reader(fh), class_column, str(path))


def _read_table(reader, class_column, source) -> Dataset:
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(f"{source} is empty") from None
    if class_column is not None and class_column not in header:
        raise ParseError(f"class column {class_column!r} not in header", row=1)
    ci = header.index(class_column) if class_column is not None else None
    feature_names = [h for i, h in enumerate(header) if i != ci]
    rows, raw_labels = [], []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, found {len(row)}", row=rowno
            )
        values = []
        for i, (name, cell) in enumerate(zip(header, row)):
            if i == ci:
                raw_labels.append(cell.strip())
            else:
                values.append(_parse_float(cell.strip(), rowno, name))
        rows.append(values)
    if not rows:
        raise ParseError(f"{source} has no data rows")
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    if ci is None:
        return Dataset(values, tuple(feature_names))
    class_labels = tuple(sorted(set(raw_labels), key=_label_key))
    lookup = {lab: i for i, lab in enumerate(class_labels)}
    labels = np.array([lookup[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(values, tuple(feature_names), labels, class_labels, class_column)


def _label_key(label: str):
    # numeric labels sort numerically, everything else lexically after them
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def save_csv(ds: Dataset, path) -> None:
    """Write ``ds`` back out; floats use ``repr`` so they round-trip exactly.

    One-hot indicator columns are dropped in favour of the class column.
    """
    keep = ds.feature_idx
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [ds.columns[i] for i in keep]
        if ds.labels is not None:
            header.append(ds.class_name or "class")
        w.writerow(header)
        for r in range(ds.n_rows):
            cells = [repr(float(ds.values[r, i])) for i in keep]
            if ds.labels is not None:
                cells.append(ds.class_labels[ds.labels[r]])
            w.writerow(cells)


def load_iris() -> Dataset:
    """The 150-row iris table bundled with the package (class column ``species``)."""
    ref = resources.files("igmn") / "datasets" / "iris.csv"
    with resources.as_file(ref) as p:
        return load_csv(p, class_column="species")


def column_stats(ds: Dataset) -> ColumnStats:
    """Per-column mean and population standard deviation (std floored)."""
    v = ds.values
    mean = v.mean(axis=0)
    std = np.sqrt(((v - mean) ** 2).mean(axis=0))
    return ColumnStats(mean, np.maximum(std, STD_FLOOR))


def one_hot(ds: Dataset) -> Dataset:
    """Append one 0/1 indicator column per class."""
    if ds.labels is None:
        raise ConfigError("one_hot needs a dataset with a class column")
    if ds.onehot_idx:
        return ds
    C = ds.n_classes
    block = np.zeros((ds.n_rows, C))
    block[np.arange(ds.n_rows), ds.labels] = 1.0
    name = ds.class_name or "class"
    cols = ds.columns + tuple(f"{name}={lab}" for lab in ds.class_labels)
    start = ds.n_columns
    return replace(
        ds,
        values=np.hstack([ds.values, block]),
        columns=cols,
        onehot_idx=tuple(range(start, start + C)),
    )


def stratified_kfold(ds: Dataset, folds: int, seed: int) -> FoldPlan:
    """Seeded fold plan; stratified by class when the dataset has labels.

    Rows are shuffled, grouped by class, and dealt round-robin into folds
    with the fold pointer carried across classes, so fold sizes differ by at
    most one and every class is spread as evenly as possible.
    """
    N = ds.n_rows
    if int(folds) != folds or folds < 2:
        raise ConfigError(f"folds must be an integer >= 2, got {folds!r}")
    if folds > N:
        raise ConfigError(f"cannot make {folds} folds from {N} rows")
    rng = np.random.default_rng(seed)
    order = rng.permutation(N)
    assignments = np.empty(N, dtype=np.int64)
    if ds.labels is None:
        assignments[order] = np.arange(N) % folds
    else:
        grouped = order[np.argsort(ds.labels[order], kind="stable")]
        assignments[grouped] = np.arange(N) % folds
    return FoldPlan(assignments, order, int(folds), int(seed))
