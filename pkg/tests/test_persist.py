import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igmn.errors import ConfigError, ParseError
from igmn.inference import Partition, predict_many
from igmn.model import Representation
from igmn.persist import dumps, load_model, loads, save_model
from igmn.train import learn

from conftest import mixture_for, random_stream


def _trained(rep=Representation.PRECISION, seed=0, D=3):
    rng = np.random.default_rng(seed)
    X = random_stream(rng, 200, D)
    mix = mixture_for(X, rep, delta=0.4, beta=0.1)
    learn(mix, X)
    return mix, X


def _same(a, b):
    assert a.n_components == b.n_components
    for name in ("means", "matrices", "log_dets", "sps", "ages", "priors"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    np.testing.assert_array_equal(a.config.dataset_std, b.config.dataset_std)
    assert a.config.chi2_threshold == b.config.chi2_threshold
    assert (a.n_updates, a.n_created, a.n_pruned, a.skipped_updates) == (
        b.n_updates, b.n_created, b.n_pruned, b.skipped_updates)


@pytest.mark.parametrize("rep", list(Representation))
def test_round_trip_is_bitwise(tmp_path, rep):
    mix, X = _trained(rep)
    path = tmp_path / "m.txt"
    save_model(mix, path, {"columns": ["a", "b", "c"]})
    back, meta = load_model(path)
    _same(mix, back)
    assert meta == {"columns": ["a", "b", "c"]}
    assert dumps(back, meta) == path.read_text()
    part = Partition((0, 1), (2,))
    a = predict_many(mix, part, X[:, :2])
    b = predict_many(back, part, X[:, :2])
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@given(st.integers(0, 500), st.integers(1, 5))
@settings(max_examples=15, deadline=None)
def test_round_trip_property(seed, D):
    mix, _ = _trained(seed=seed, D=D)
    text = dumps(mix)
    back, _ = loads(text)
    _same(mix, back)
    assert dumps(back) == text


def test_training_continues_identically_after_reload():
    mix, X = _trained()
    back, _ = loads(dumps(mix))
    rng = np.random.default_rng(9)
    more = random_stream(rng, 50, 3)
    learn(mix, more)
    learn(back, more)
    _same(mix, back)


def test_unknown_version_rejected():
    mix, _ = _trained()
    text = dumps(mix).replace("format_version 1", "format_version 7")
    with pytest.raises(ConfigError, match="format_version 7"):
        loads(text)


def test_malformed_files():
    with pytest.raises(ParseError):
        loads("not a model\n")
    mix, _ = _trained()
    lines = dumps(mix).splitlines()
    broken = "\n".join(l for l in lines if not l.startswith("prior"))
    with pytest.raises(ParseError):
        loads(broken)
    truncated = "\n".join(lines[:-1])
    with pytest.raises(ParseError):
        loads(truncated)


def test_empty_mixture_round_trip():
    mix = mixture_for(np.array([[0.0, 0.0], [1.0, 1.0]]), Representation.PRECISION)
    back, meta = loads(dumps(mix))
    assert back.n_components == 0
    assert meta == {}
