import numpy as np
import pytest

from igmn import _backend
from igmn.model import LearnerConfig, Mixture, Representation
from igmn.train import learn


def random_stream(rng, N, D, clusters=3):
    """Points drawn around a few random centres with random spreads."""
    centres = rng.normal(0.0, 3.0, (clusters, D))
    scales = rng.uniform(0.3, 1.5, (clusters, D))
    lab = rng.integers(clusters, size=N)
    return centres[lab] + scales[lab] * rng.standard_normal((N, D))


def mixture_for(X, representation, **kw):
    cfg = LearnerConfig.from_data(X, representation=representation, **kw)
    return Mixture(cfg)


def train_pair(X, backend=None, events=False, **kw):
    """Train a reference and a fast mixture on the same stream."""
    out = []
    for rep in (Representation.COVARIANCE, Representation.PRECISION):
        mix = mixture_for(X, rep, **kw)
        log = []
        cb = (lambda kind, n, ids: log.append((kind, n, tuple(ids)))) if events else None
        learn(mix, X, backend=backend, on_event=cb)
        out.append((mix, log) if events else mix)
    return out


@pytest.fixture
def python_backend():
    prev = _backend.set_backend("python")
    yield
    _backend.set_backend(prev)


BACKENDS = _backend.available()


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Remember one criterion's outcome for the end-of-run summary and fail if needed."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
