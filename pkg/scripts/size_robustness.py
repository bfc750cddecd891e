#!/usr/bin/env python3
"""Accuracy of each aggregation method as the dataset grows.

Feature-blind mixture models can lose accuracy when more items are
added at a fixed labeling-function density, while the feature-aware
model holds steady.  This script reruns that comparison on seeded
synthetic benchmarks and writes both the per-run rows and the
mean/std summary as CSV.

Example:
    python scripts/size_robustness.py --out results/size --runs 10 \
        --sizes 1000,5000,10000,15000,20000
"""

import argparse
import csv
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fable.studies import size_study, summarize_size_study  # noqa: E402

METHODS = ("mv", "ds", "ibcc", "ebcc", "fable")


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,5000,10000,15000,20000",
                        help="comma-separated dataset sizes")
    parser.add_argument("--runs", type=int, default=10, help="seeded repeats per size")
    parser.add_argument("--methods", default=",".join(METHODS),
                        help=f"comma-separated subset of {METHODS}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--psi", type=float, default=1.0,
                        help="labeling-function window width, in std units")
    parser.add_argument("--out", default="size_study",
                        help="output prefix; writes <out>_runs.csv and <out>_summary.csv")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    sizes = tuple(int(s) for s in args.sizes.split(",") if s.strip())
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())

    start = time.perf_counter()
    rows = size_study(sizes=sizes, runs=args.runs, methods=methods,
                      seed=args.seed, psi=args.psi)
    elapsed = time.perf_counter() - start
    summary = summarize_size_study(rows)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    runs_path = out.with_name(out.name + "_runs.csv")
    summary_path = out.with_name(out.name + "_summary.csv")
    with open(runs_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    with open(summary_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(summary[0]))
        writer.writeheader()
        writer.writerows(summary)

    print(f"# {len(rows)} fits in {elapsed:.1f}s -> {runs_path}, {summary_path}")
    print(f"{'method':<8}" + "".join(f"{size:>16}" for size in sizes))
    for method in methods:
        cells = []
        for size in sizes:
            row = next(r for r in summary if r["method"] == method and r["size"] == size)
            cells.append(f"{row['mean']:.4f}±{row['std']:.3f}")
        print(f"{method:<8}" + "".join(f"{cell:>16}" for cell in cells))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
