"""Plain-text model files.

Every real is written with 17 significant digits, so a save/load round trip
restores each float64 bit for bit.  Layout, one record per line::

    igmn-model
    format_version 1
    representation precision
    dimension 3
    delta 0.5
    ...
    meta {"columns": [...]}
    components 2
    component 0
    mean m0 m1 m2
    log_det_cov ...
    det_cov ...
    sp ...
    age ...
    prior ...
    matrix a00 a01 a02
    matrix a10 a11 a12
    matrix a20 a21 a22
    component 1
    ...

``det_cov`` is informational (it underflows for large dimension); loading
uses ``log_det_cov``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .model import LearnerConfig, Mixture, Representation

MAGIC = "igmn-model"
FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(values) -> str:
    return " ".join(_fmt(v) for v in values)


def dumps(mix: Mixture, meta: dict | None = None) -> str:
    cfg = mix.config
    out = [
        MAGIC,
        f"format_version {FORMAT_VERSION}",
        f"representation {mix.representation.value}",
        f"dimension {mix.dimension}",
        f"delta {_fmt(cfg.delta)}",
        f"beta {_fmt(cfg.beta)}",
        f"v_min {cfg.v_min}",
        f"sp_min {_fmt(cfg.sp_min)}",
        f"pruning_enabled {int(cfg.pruning_enabled)}",
        f"dataset_std {_fmt_row(cfg.dataset_std)}",
        f"counters {mix.skipped_updates} {mix.n_updates} {mix.n_created} {mix.n_pruned}",
        f"meta {json.dumps(meta or {}, sort_keys=True)}",
        f"components {mix.n_components}",
    ]
    for k, comp in enumerate(mix.components):
        out += [
            f"component {k}",
            f"mean {_fmt_row(comp.mean)}",
            f"log_det_cov {_fmt(comp.log_det_cov)}",
            f"det_cov {_fmt(comp.det_cov)}",
            f"sp {_fmt(comp.sp)}",
            f"age {comp.age}",
            f"prior {_fmt(comp.prior)}",
        ]
        out += [f"matrix {_fmt_row(row)}" for row in comp.matrix]
    return "\n".join(out) + "\n"


def save_model(mix: Mixture, path, meta: dict | None = None) -> None:
    """Write ``mix`` (and a JSON-serializable ``meta`` dict) to ``path``."""
    Path(path).write_text(dumps(mix, meta), encoding="utf-8")


class _Lines:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self._i = 0

    def take(self, key: str) -> str:
        while self._i < len(self._lines) and not self._lines[self._i].strip():
            self._i += 1
        if self._i >= len(self._lines):
            raise ParseError(f"unexpected end of model file, wanted {key!r}", row=self._i + 1)
        line = self._lines[self._i]
        self._i += 1
        name, _, rest = line.partition(" ")
        if name != key:
            raise ParseError(f"expected {key!r}, found {name!r}", row=self._i)
        return rest.strip()

    def floats(self, key: str, n: int) -> np.ndarray:
        rest = self.take(key)
        try:
            vals = np.array([float(t) for t in rest.split()], dtype=np.float64)
        except ValueError:
            raise ParseError(f"bad number in {key!r}", row=self._i) from None
        if vals.size != n:
            raise ParseError(f"{key!r} needs {n} values, found {vals.size}", row=self._i)
        return vals

    def integer(self, key: str) -> int:
        rest = self.take(key)
        try:
            return int(rest)
        except ValueError:
            raise ParseError(f"bad integer in {key!r}", row=self._i) from None


def loads(text: str) -> tuple[Mixture, dict]:
    lines = _Lines(text)
    if lines.take(MAGIC) != "":
        raise ParseError("not a model file", row=1)
    version = lines.integer("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported model format_version {version}; this build reads {FORMAT_VERSION}"
        )
    rep = Representation(lines.take("representation"))
    D = lines.integer("dimension")
    delta = float(lines.floats("delta", 1)[0])
    beta = float(lines.floats("beta", 1)[0])
    v_min = lines.integer("v_min")
    sp_min = float(lines.floats("sp_min", 1)[0])
    pruning = bool(lines.integer("pruning_enabled"))
    std = lines.floats("dataset_std", D)
    counters = lines.floats("counters", 4).astype(np.int64)
    try:
        meta = json.loads(lines.take("meta"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad meta record: {exc}") from None
    cfg = LearnerConfig(
        dataset_std=std, delta=delta, beta=beta, v_min=v_min, sp_min=sp_min,
        pruning_enabled=pruning, representation=rep,
    )
    mix = Mixture(cfg)
    K = lines.integer("components")
    slots = mix._slots
    for k in range(K):
        if lines.integer("component") != k:
            raise ParseError(f"components out of order at {k}")
        j = slots.append()
        slots.means[j] = lines.floats("mean", D)
        slots.log_det[j] = float(lines.floats("log_det_cov", 1)[0])
        lines.floats("det_cov", 1)
        slots.sp[j] = float(lines.floats("sp", 1)[0])
        slots.age[j] = lines.integer("age")
        slots.prior[j] = float(lines.floats("prior", 1)[0])
        for r in range(D):
            slots.mats[j, r] = lines.floats("matrix", D)
        if not math.isfinite(slots.log_det[j]):
            raise ParseError(f"component {k} has a non-finite log determinant")
    mix.skipped_updates, mix.n_updates, mix.n_created, mix.n_pruned = (int(c) for c in counters)
    return mix, meta


def load_model(path) -> tuple[Mixture, dict]:
    """Read a model file; returns ``(mixture, meta)``."""
    return loads(Path(path).read_text(encoding="utf-8"))
