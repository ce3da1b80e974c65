"""Command-line entry point: ``igmn {train,eval,predict,bench,rl}``.

Reports go to ``--out`` or standard output as CSV; human-readable summary
lines go to standard error.  Exit status is 0 on success, 1 on a runtime
failure and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
import time

import numpy as np

from . import __version__, _backend
from .bench import ScalingConfig, exponents, run_scaling, write_rows
from .data import Dataset, column_stats, load_csv, one_hot
from .errors import ConfigError, IGMNError
from .evaluate import LEARNERS, cross_validate, representation_for
from .inference import Partition, predict_many
from .model import DEFAULT_BETA, LearnerConfig, Mixture
from .persist import load_model, save_model
from .rl import default_agent_config, env_by_name, run_task, write_records
from .train import learn

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
EPISODE_CAPS = {"cart_pole": 1000, "mountain_car": 2000}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _learner_flags(p):
    g = p.add_argument_group("learner")
    g.add_argument("--delta", type=float, default=0.5, help="initial spread as a fraction of the data std (default 0.5)")
    g.add_argument("--beta", type=float, default=DEFAULT_BETA,
                   help="novelty level; the default is the smallest double, i.e. the maximal percentile")
    g.add_argument("--vmin", type=int, default=5, help="minimum age before pruning (default 5)")
    g.add_argument("--spmin", type=float, default=3.0, help="minimum accumulated posterior to survive pruning (default 3)")
    g.add_argument("--no-prune", action="store_true", help="disable pruning")
    g.add_argument("--learner", choices=sorted(LEARNERS), default="fast")
    g.add_argument("--standardize", action="store_true", help="standardize input features (off by default)")


def _data_flags(p, required=True):
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--class", dest="class_col", help="name of the class column")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="igmn", description="Incremental Gaussian mixture learners.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto",
                   help="kernel backend (default: compiled when built)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="single pass over a CSV file, write a model file")
    _data_flags(t)
    _learner_flags(t)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--shuffle", action="store_true", help="present rows in a seeded random order")
    t.add_argument("--out", required=True, help="model file to write")

    e = sub.add_parser("eval", help="stratified k-fold cross-validation")
    _data_flags(e)
    _learner_flags(e)
    e.add_argument("--target", help="regression target column (default: last column) when no --class")
    e.add_argument("--folds", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="CSV report path (default: stdout)")

    q = sub.add_parser("predict", help="predict target columns with a saved model")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--targets", help="comma-separated target columns (default: the class block)")
    q.add_argument("--out", help="CSV output path (default: stdout)")

    b = sub.add_parser("bench", help="training/test time against dimension")
    b.add_argument("--dims", default="1,2,4,8,16,32,64,128,256", help="comma-separated, increasing")
    b.add_argument("--n", type=int, default=1000, help="points per dataset")
    b.add_argument("--train-fraction", type=float, default=0.9)
    b.add_argument("--learners", default="reference,fast")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV path (default: stdout)")

    r = sub.add_parser("rl", help="Q-learning on a control task")
    r.add_argument("--task", choices=["cart_pole", "mountain_car"], default="cart_pole")
    r.add_argument("--episodes", type=int, help="episode cap (default: 1000 cart-pole, 2000 mountain car)")
    r.add_argument("--seed", type=int, default=0)
    # unset flags keep the task's shipped defaults
    r.add_argument("--gamma", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--epsilon-decay", type=float)
    r.add_argument("--epsilon-min", type=float)
    r.add_argument("--random", action="store_true", help="run the random-action baseline")
    r.add_argument("--keep-going", action="store_true", help="do not stop once solved")
    r.add_argument("--out", help="per-episode CSV path (default: stdout)")
    return p


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _learner_kwargs(args) -> dict:
    return dict(delta=args.delta, beta=args.beta, v_min=args.vmin, sp_min=args.spmin,
                pruning_enabled=not args.no_prune)


def _training_matrix(ds: Dataset, standardize: bool):
    """Training rows (with the one-hot block when classed) and model metadata."""
    work = one_hot(ds) if ds.labels is not None else ds
    X = np.array(work.values)
    meta = {"columns": list(work.columns), "onehot": list(work.onehot_idx),
            "class_column": ds.class_name, "class_labels": list(ds.class_labels)}
    if standardize:
        stats = column_stats(ds)
        n = ds.n_columns
        X[:, :n] = (X[:, :n] - stats.mean) / stats.std
        meta["standardize"] = {"mean": stats.mean.tolist(), "std": stats.std.tolist()}
    return X, meta


def cmd_train(args) -> int:
    ds = load_csv(args.data, class_column=args.class_col)
    X, meta = _training_matrix(ds, args.standardize)
    if args.shuffle:
        X = X[np.random.default_rng(args.seed).permutation(X.shape[0])]
    cfg = LearnerConfig.from_data(X, representation=representation_for(args.learner), **_learner_kwargs(args))
    mix = Mixture(cfg)
    t0 = time.perf_counter()
    learn(mix, X)
    seconds = time.perf_counter() - t0
    save_model(mix, args.out, meta)
    _say(f"trained K={mix.n_components} rows={X.shape[0]} train_seconds={seconds:.6f} "
         f"skipped_updates={mix.skipped_updates} -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.folds < 2:
        raise ConfigError(f"--folds must be at least 2, got {args.folds}")
    ds = load_csv(args.data, class_column=args.class_col)
    report = cross_validate(ds, args.folds, args.seed, learner=args.learner, target=args.target,
                            standardize=args.standardize, **_learner_kwargs(args))
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("fold", "n_train", "n_test", report.metric, "components"))
        for f in report.folds:
            w.writerow((f.fold, f.n_train, f.n_test, repr(f.score), f.components))
        w.writerow(("mean", "", "", repr(report.mean), repr(report.mean_components)))
        w.writerow(("std", "", "", repr(report.std), repr(float(report.components.std()))))
    _say(f"{report.metric} {report.mean:.4f} +- {report.std:.4f} over {args.folds} folds, "
         f"mean components {report.mean_components:.2f}")
    return EXIT_OK


def _resolve_columns(names, columns):
    idx = []
    for name in names:
        if name in columns:
            idx.append(columns.index(name))
        else:
            raise ConfigError(f"model has no column {name!r}; columns are {columns}")
    return idx


def cmd_predict(args) -> int:
    mix, meta = load_model(args.model)
    columns = meta.get("columns") or [f"x{i}" for i in range(mix.dimension)]
    if len(columns) != mix.dimension:
        raise ConfigError("model metadata does not match its dimension")
    onehot = meta.get("onehot", [])
    if args.targets:
        t_idx = _resolve_columns([s.strip() for s in args.targets.split(",") if s.strip()], columns)
    elif onehot:
        t_idx = list(onehot)
    else:
        raise ConfigError("--targets is required for a model without a class block")
    part = Partition.targets(mix.dimension, t_idx)
    known_names = [columns[i] for i in part.known_idx]

    with open(args.data, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    class_col = meta.get("class_column")
    ds = load_csv(args.data, class_column=class_col if class_col in header else None)
    table = {c: ds.values[:, i] for i, c in enumerate(ds.columns)}
    if ds.labels is not None:
        # class indicators as inputs, in the model's label order
        names = np.array(ds.class_labels)[ds.labels]
        for i in onehot:
            lab = meta["class_labels"][onehot.index(i)]
            table[columns[i]] = (names == lab).astype(np.float64)
    missing = [c for c in known_names if c not in table]
    if missing:
        raise ConfigError(f"data lacks model input columns {missing}")
    X = np.column_stack([table[c] for c in known_names]) if known_names else np.empty((ds.n_rows, 0))
    std = meta.get("standardize")
    if std:
        mean, sd = np.asarray(std["mean"]), np.asarray(std["std"])
        for j, i in enumerate(part.known_idx):
            if i < mean.size:
                X[:, j] = (X[:, j] - mean[i]) / sd[i]
    means, covs, _ = predict_many(mix, part, X)

    target_names = [columns[i] for i in part.target_idx]
    labels = meta.get("class_labels") or []
    is_class = bool(onehot) and sorted(part.target_idx) == sorted(onehot) and len(labels) == len(onehot)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = [f"{n}_mean" for n in target_names] + [f"{n}_var" for n in target_names]
        if is_class:
            head.append("predicted_class")
        w.writerow(head)
        order = [onehot.index(i) for i in part.target_idx] if is_class else None
        for m, c in zip(means, covs):
            row = [repr(float(v)) for v in m] + [repr(float(v)) for v in np.diag(c)]
            if is_class:
                scores = np.empty(len(onehot))
                scores[order] = m
                row.append(labels[int(np.argmax(scores))])
            w.writerow(row)
    _say(f"predicted {len(target_names)} target(s) for {X.shape[0]} rows with K={mix.n_components}")
    return EXIT_OK


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None


def cmd_bench(args) -> int:
    cfg = ScalingConfig(
        dims=_int_list(args.dims, "--dims"),
        n_points=args.n,
        train_fraction=args.train_fraction,
        seed=args.seed,
        learners=tuple(s.strip() for s in args.learners.split(",") if s.strip()),
        repeats=args.repeats,
    )
    rows = run_scaling(cfg, progress=lambda r: _say(
        f"dim={r.dim} {r.learner}: train {r.train_seconds:.4g}s test {r.test_seconds:.4g}s K={r.component_count}"))
    with _output(args.out) as fh:
        write_rows(rows, fh)
    try:
        for name, slope in exponents(rows).items():
            _say(f"exponent {name} {slope:.3f}")
    except ConfigError as exc:
        _say(f"exponent fit skipped: {exc}")
    return EXIT_OK


def cmd_rl(args) -> int:
    spec = env_by_name(args.task)
    flags = {"gamma": args.gamma, "delta": args.delta, "epsilon_decay": args.epsilon_decay,
             "epsilon_min": args.epsilon_min, "max_episodes": args.episodes}
    overrides = {k: v for k, v in flags.items() if v is not None}
    overrides.setdefault("max_episodes", EPISODE_CAPS[spec.name])
    cfg = default_agent_config(spec, **overrides)
    result = run_task(spec, cfg, args.seed, policy="random" if args.random else "agent",
                      stop_when_solved=not args.keep_going)
    with _output(args.out) as fh:
        write_records(result.records, fh)
    solved = result.episodes_to_solve if result.solved else "unsolved"
    _say(f"{spec.name} seed={args.seed} episodes_to_solve={solved} goal_episode={result.goal_episode} "
         f"max_components={result.max_components}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "bench": cmd_bench, "rl": cmd_rl}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        prev = _backend.set_backend(args.backend)
    except (ValueError, RuntimeError) as exc:
        _say(f"igmn: error: {exc}")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        _say(f"igmn {args.command}: error: {exc}")
        return EXIT_USAGE
    except (IGMNError, OSError, ValueError, ArithmeticError) as exc:
        _say(f"igmn {args.command}: failed: {exc}")
        return EXIT_FAILURE
    finally:
        _backend.set_backend(prev)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
