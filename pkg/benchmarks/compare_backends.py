"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/compare_backends.py --dims 4,16,64 --n 500
"""

import argparse
import csv
import sys

from igmn import _backend
from igmn.bench import compare_backends


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="4,16,64", help="comma-separated dimensions")
    ap.add_argument("--n", type=int, default=500, help="points per dataset")
    ap.add_argument("--learner", choices=["fast", "reference"], default="fast")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if "compiled" not in _backend.available():
        sys.exit("compiled extension not built; run `python setup.py build_ext --inplace`")
    dims = [int(d) for d in args.dims.split(",")]
    rows = compare_backends(dims, args.n, args.seed, args.learner, args.repeats)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("dim", "backend", "train_seconds", "test_seconds"))
    by_cell = {}
    for r in rows:
        w.writerow((r.dim, r.backend, f"{r.train_seconds:.6f}", f"{r.test_seconds:.6f}"))
        by_cell.setdefault(r.dim, {})[r.backend] = r.train_seconds
    for dim, t in by_cell.items():
        print(f"# D={dim}: compiled is {t['python'] / t['compiled']:.1f}x faster at training",
              file=sys.stderr)


if __name__ == "__main__":
    main()
