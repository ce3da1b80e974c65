import csv
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from igmn.cli import main
from igmn.data import load_iris, one_hot
from igmn.inference import Partition, predict_many
from igmn.persist import load_model

IRIS = str(resources.files("igmn") / "datasets" / "iris.csv")


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_writes_model(tmp_path, capsys):
    out = tmp_path / "iris.model"
    assert main(["train", "--data", IRIS, "--class", "species", "--out", str(out)]) == 0
    mix, meta = load_model(out)
    assert 2 <= mix.n_components <= 5
    assert meta["class_labels"] == ["setosa", "versicolor", "virginica"]
    assert "K=" in capsys.readouterr().err


def test_beta_zero_gives_one_component(tmp_path):
    out = tmp_path / "m"
    assert main(["train", "--data", IRIS, "--class", "species", "--beta", "0", "--out", str(out)]) == 0
    assert load_model(out)[0].n_components == 1


def test_predict_matches_library(tmp_path):
    model = tmp_path / "m"
    preds = tmp_path / "p.csv"
    assert main(["train", "--data", IRIS, "--class", "species", "--out", str(model)]) == 0
    assert main(["predict", "--model", str(model), "--data", IRIS, "--out", str(preds)]) == 0
    rows = _read(preds)
    assert rows[0][:3] == ["species=setosa_mean", "species=versicolor_mean", "species=virginica_mean"]
    assert rows[0][-1] == "predicted_class"

    mix, _ = load_model(model)
    ds = one_hot(load_iris())
    part = Partition.targets(mix.dimension, list(ds.onehot_idx))
    means, covs, _ = predict_many(mix, part, ds.values[:, part.known])
    got = np.array([[float(v) for v in r[:6]] for r in rows[1:]])
    np.testing.assert_array_equal(got[:, :3], means)
    np.testing.assert_array_equal(got[:, 3:], np.diagonal(covs, axis1=1, axis2=2))
    labels = np.array(ds.class_labels)[np.argmax(means, axis=1)]
    assert [r[-1] for r in rows[1:]] == list(labels)


def test_predict_regression_target(tmp_path):
    model = tmp_path / "m"
    preds = tmp_path / "p.csv"
    assert main(["train", "--data", IRIS, "--out", str(model), "--class", "species"]) == 0
    assert main(["predict", "--model", str(model), "--data", IRIS, "--targets", "petal_width",
                 "--out", str(preds)]) == 0
    rows = _read(preds)
    assert rows[0] == ["petal_width_mean", "petal_width_var"]
    assert len(rows) == 151


def test_predict_column_mismatch(tmp_path, capsys):
    model = tmp_path / "m"
    other = tmp_path / "o.csv"
    other.write_text("a,b\n1,2\n")
    assert main(["train", "--data", IRIS, "--class", "species", "--out", str(model)]) == 0
    assert main(["predict", "--model", str(model), "--data", str(other)]) == 2
    assert main(["predict", "--model", str(model), "--data", IRIS, "--targets", "nope"]) == 2
    assert "error" in capsys.readouterr().err


def test_eval_is_byte_identical_across_runs(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["eval", "--data", IRIS, "--class", "species", "--seed", "4", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read(a)
    assert rows[0] == ["fold", "n_train", "n_test", "accuracy", "components"]
    assert len(rows) == 1 + 10 + 2
    assert float(rows[-2][3]) >= 0.9
    assert "accuracy" in capsys.readouterr().err


def test_eval_learners_agree(tmp_path):
    outs = []
    for learner in ("fast", "reference"):
        out = tmp_path / f"{learner}.csv"
        assert main(["eval", "--data", IRIS, "--class", "species", "--learner", learner,
                     "--out", str(out)]) == 0
        outs.append(_read(out))
    for ra, rb in zip(*outs):
        if ra[0].isdigit():
            assert abs(float(ra[3]) - float(rb[3])) <= 1e-8
            assert ra[4] == rb[4]


def test_eval_rejects_one_fold():
    assert main(["eval", "--data", IRIS, "--class", "species", "--folds", "1"]) == 2


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["train", "--bogus"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "m")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,NaN\n")
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "m")]) == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "igmn", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--dims", "1,2", "--n", "40", "--repeats", "1", "--out", str(out)]) == 0
    rows = _read(out)
    assert rows[0] == ["dim", "learner", "train_seconds", "test_seconds", "component_count"]
    assert [(r[0], r[1]) for r in rows[1:]] == [("1", "reference"), ("1", "fast"), ("2", "reference"), ("2", "fast")]
    assert "exponent fit skipped" in capsys.readouterr().err
    assert main(["bench", "--dims", "4,2"]) == 2


def test_rl_command_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["rl", "--task", "cart_pole", "--episodes", "5", "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read(a)
    assert rows[0] == ["episode", "reward", "epsilon", "components"]
    assert len(rows) == 6


def test_rl_random_baseline(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["rl", "--task", "mountain_car", "--random", "--episodes", "3", "--out", str(out)]) == 0
    assert all(float(r[1]) == -200.0 for r in _read(out)[1:])


def test_rl_flags_override_task_defaults(tmp_path, capsys):
    out = tmp_path / "mc.csv"
    assert main(["rl", "--task", "mountain_car", "--episodes", "2", "--out", str(out)]) == 0
    # the shipped mountain-car agent acts greedily from the first episode
    assert [float(r[2]) for r in _read(out)[1:]] == [0.0, 0.0]
    assert main(["rl", "--task", "cart_pole", "--episodes", "2", "--epsilon-min", "0.5",
                 "--epsilon-decay", "0.1", "--out", str(out)]) == 0
    assert [float(r[2]) for r in _read(out)[1:]] == [1.0, 0.5]
