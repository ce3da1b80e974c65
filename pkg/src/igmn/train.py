"""Single-pass training over a stream of points.

:func:`learn` feeds rows to the learner matching the mixture's
representation: precision-form mixtures use the fast learner,
covariance-form mixtures the reference learner.  With the compiled backend
the inner loop runs in C and only component creation and pruning come back
to Python.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .errors import ConfigError, DegenerateComponent
from .fast import step_fast
from .model import GUARD_EPS, Mixture, Representation, create_component, prune
from .reference import step_reference


def step(mix: Mixture, x):
    """One traced learning step with the learner that fits ``mix``."""
    if mix.representation is Representation.PRECISION:
        return step_fast(mix, x)
    return step_reference(mix, x)


def learn(mix: Mixture, X, backend: str | None = None, on_event=None) -> Mixture:
    """Present every row of ``X`` once, in order.

    ``on_event(kind, index, ids)`` is called for each creation
    (``"create"``, the new component id) and pruning (``"prune"``, the
    removed ids), where ``index`` is the row that triggered it.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != mix.dimension:
        raise ConfigError(f"data of shape {X.shape} does not match dimension {mix.dimension}")
    if _backend.resolve(backend) == "python":
        for n, x in enumerate(X):
            trace = step(mix, x)
            if on_event is not None:
                if trace.created:
                    on_event("create", n, [trace.created_id])
                if trace.pruned_ids:
                    on_event("prune", n, trace.pruned_ids)
        return mix
    _learn_compiled(mix, X, on_event)
    return mix


def _learn_compiled(mix: Mixture, X: np.ndarray, on_event) -> None:
    ck = _backend.compiled
    cfg = mix.config
    run = ck.fast_run if mix.representation is Representation.PRECISION else ck.reference_run
    counters = np.zeros(2, dtype=np.int64)
    N = X.shape[0]
    n = 0
    while n < N:
        s = mix._slots
        n, event = run(
            s.means, s.mats, s.log_det, s.sp, s.age, s.prior, s.size,
            X, n, cfg.chi2_threshold, GUARD_EPS,
            cfg.pruning_enabled, cfg.v_min, cfg.sp_min, counters,
        )
        if event == ck.EVENT_CREATE:
            k = create_component(mix, X[n])
            if on_event is not None:
                on_event("create", n, [k])
            removed = prune(mix)
            if removed and on_event is not None:
                on_event("prune", n, removed)
            n += 1
        elif event == ck.EVENT_PRUNE:
            removed = prune(mix)
            if on_event is not None:
                on_event("prune", n - 1, removed)
        elif event == ck.EVENT_DEGENERATE:
            raise DegenerateComponent(f"component {n} covariance is not positive definite")
    mix.skipped_updates += int(counters[0])
    mix.n_updates += int(counters[1])
