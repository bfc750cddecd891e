"""Command-line interface: aggregate votes, generate benchmarks, run studies.

Exit codes: 0 success, 2 usage error (argparse), 3 unreadable or invalid
data, 4 numerical failure.  All commands are deterministic given
``--seed``; the only non-deterministic output is the wall time recorded
in run-record files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .data import DatasetError, default_synthetic_spec, generate_synthetic, load_csv, load_json, save_json
from .linalg import NumericalError
from .metrics import f1_binary
from .studies import (
    METHODS,
    correlation_study,
    fit_method,
    select_metric,
    size_study,
    summarize_size_study,
)

__all__ = ["main", "entry", "RunRecord"]


@dataclasses.dataclass
class RunRecord:
    """Reproducibility trail written next to every aggregation output."""

    command: str
    method: str
    dataset: str
    n_items: int
    n_lfs: int
    num_classes: int
    seed: int
    params: dict
    metric: str | None
    metric_value: float | None
    n_iters: int
    converged: bool | None
    wall_time_ms: float

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _load_dataset(path_str: str, num_classes=None):
    path = Path(path_str)
    if path.is_dir():
        gold = path / "gold.csv"
        return load_csv(
            path / "features.csv",
            path / "labels.csv",
            gold_path=gold if gold.exists() else None,
            num_classes=num_classes,
            name=path.name,
        )
    return load_json(path, num_classes=num_classes)


def _parse_psi(args) -> object:
    if args.psi is not None:
        return args.psi
    if args.psi_range is not None:
        return None
    return 1.0


def cmd_aggregate(args) -> int:
    dataset = _load_dataset(args.dataset)
    start = time.perf_counter()
    posterior = fit_method(
        dataset,
        args.method,
        seed=args.seed,
        max_iters=args.max_iters,
        tol=args.tol,
        subtypes=args.subtypes,
        lanczos_rank=args.lanczos_rank,
    )
    wall_ms = 1000.0 * (time.perf_counter() - start)

    ids = dataset.ids or tuple(f"{i:08d}" for i in range(dataset.n_items))
    payload = {
        item_id: {
            "prediction": int(posterior.predictions[row]),
            "probs": [float(v) for v in posterior.probs[row]],
        }
        for row, item_id in enumerate(ids)
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

    metric_name = metric_value = None
    if dataset.gold is not None:
        metric_name, score = select_metric(
            dataset.num_classes, args.metric, args.positive_class
        )
        metric_value = float(score(posterior.predictions, dataset.gold))
        print(f"{metric_name}={metric_value:.4f}")
    record = RunRecord(
        command="aggregate",
        method=args.method,
        dataset=dataset.name,
        n_items=dataset.n_items,
        n_lfs=dataset.n_lfs,
        num_classes=dataset.num_classes,
        seed=args.seed,
        params={
            "max_iters": args.max_iters,
            "tol": args.tol,
            "subtypes": args.subtypes,
            "lanczos_rank": args.lanczos_rank,
        },
        metric=metric_name,
        metric_value=metric_value,
        n_iters=posterior.n_iters,
        converged=posterior.diagnostics.get("converged"),
        wall_time_ms=wall_ms,
    )
    record.write(args.record or f"{args.out}.run.json")
    return 0


def cmd_synth(args) -> int:
    psi = args.psi
    if args.psi_range is not None:
        lo, hi = args.psi_range
        rng = np.random.default_rng([args.seed, 3])
        psi = rng.uniform(lo, hi, size=8)
    spec = default_synthetic_spec(size=args.size, seed=args.seed, psi=psi)
    dataset = generate_synthetic(spec)
    save_json(dataset, args.out)
    print(f"wrote {dataset.n_items} items, {dataset.n_lfs} LFs -> {args.out}")
    return 0


def cmd_study_corr(args) -> int:
    rows, r, p = correlation_study(
        trials=args.trials,
        size=args.size,
        seed=args.seed,
        psi=args.psi,
        psi_range=tuple(args.psi_range) if args.psi_range else (1.0, 3.0),
        subtypes=args.subtypes,
        max_iters=args.max_iters,
        lanczos_rank=args.lanczos_rank,
    )
    fields = ["trial", "seed", "corr", "metric", "ebcc", "fable", "delta"]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([repr(row[f]) if isinstance(row[f], float) else row[f] for f in fields])
    print(f"pearson_r={r:.4f} p_value={p:.6g} trials={len(rows)}")
    return 0


def cmd_bench_size(args) -> int:
    rows = size_study(
        sizes=args.sizes,
        runs=args.runs,
        methods=args.methods,
        seed=args.seed,
        psi=args.psi if args.psi is not None else 1.0,
        subtypes=args.subtypes,
        max_iters=args.max_iters,
        lanczos_rank=args.lanczos_rank,
    )
    summary = summarize_size_study(rows)
    fields = ["method", "size", "runs", "metric", "mean", "std"]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in summary:
            writer.writerow([repr(row[f]) if isinstance(row[f], float) else row[f] for f in fields])
    for row in summary:
        print(f"{row['method']:>6} n={row['size']:<6} {row['metric']}={row['mean']:.4f} +-{row['std']:.4f}")
    return 0


def _method_list(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if not methods or any(m not in METHODS for m in methods):
        raise argparse.ArgumentTypeError(
            f"methods must be a comma list drawn from {','.join(METHODS)}"
        )
    return methods


def _size_list(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from exc
    if not sizes or any(s < 4 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be integers >= 4")
    return sizes


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--max-iters", type=int, default=None, help="sweep budget")
    parser.add_argument("--tol", type=float, default=None, help="q(z) convergence tolerance")
    parser.add_argument("--subtypes", type=int, default=3, help="mixture components per class")
    parser.add_argument("--lanczos-rank", type=int, default=None, help="Krylov dimension of GP solves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fable",
        description="Aggregate noisy labeling-function votes into label posteriors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    agg = sub.add_parser("aggregate", help="fit one method on a dataset and write predictions")
    agg.add_argument("--dataset", required=True, help="JSON file or directory of CSVs")
    agg.add_argument("--method", required=True, choices=METHODS)
    agg.add_argument("--out", required=True, help="predictions JSON path")
    agg.add_argument("--record", default=None, help="run-record path (default: <out>.run.json)")
    agg.add_argument("--metric", default="auto", choices=["auto", "accuracy", "f1"])
    agg.add_argument("--positive-class", type=int, default=1)
    _add_fit_flags(agg)
    agg.set_defaults(func=cmd_aggregate)

    synth = sub.add_parser("synth", help="generate a seeded synthetic benchmark")
    synth.add_argument("--size", type=int, default=1000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--psi", type=float, default=None, help="fixed LF width multiplier")
    synth.add_argument("--psi-range", type=float, nargs=2, default=None, metavar=("LO", "HI"),
                       help="draw one width per LF uniformly from [LO, HI]")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    corr = sub.add_parser("study-corr", help="correlation between Corr(X, LFs) and the feature-aware gain")
    corr.add_argument("--trials", type=int, default=50)
    corr.add_argument("--size", type=int, default=1000)
    corr.add_argument("--psi", type=float, default=None, help="fix all LF widths (degenerate study)")
    corr.add_argument("--psi-range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    corr.add_argument("--out", required=True, help="per-trial CSV path")
    _add_fit_flags(corr)
    corr.set_defaults(func=cmd_study_corr)

    bench = sub.add_parser("bench-size", help="mean accuracy of each method across dataset sizes")
    bench.add_argument("--sizes", type=_size_list, default=[1000, 5000, 10000, 15000, 20000])
    bench.add_argument("--runs", type=int, default=10)
    bench.add_argument("--methods", type=_method_list, default=list(METHODS))
    bench.add_argument("--psi", type=float, default=1.0)
    bench.add_argument("--out", required=True, help="summary CSV path")
    _add_fit_flags(bench)
    bench.set_defaults(func=cmd_bench_size)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    raise SystemExit(main())
