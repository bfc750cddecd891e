"""Seeded experiment harnesses: size robustness and the correlation study.

Both studies sample synthetic datasets, fit the requested aggregation
methods, and return plain row dictionaries so callers can dump them to
CSV.  Per-trial seeds are the master seed XOR the trial index, which
keeps every trial reproducible in isolation.
"""

from __future__ import annotations

import numpy as np

from .baselines import Posterior, dawid_skene, ebcc_fit, ibcc_fit, majority_vote
from .data import Dataset, default_synthetic_spec, generate_synthetic
from .metrics import accuracy, f1_binary, feature_lf_correlation, pearson_r
from .model import FableConfig, fable_fit

__all__ = [
    "METHODS",
    "fit_method",
    "select_metric",
    "size_study",
    "summarize_size_study",
    "correlation_study",
]

METHODS = ("mv", "ds", "ibcc", "ebcc", "fable")


def select_metric(num_classes: int, metric: str = "auto", positive_class: int = 1):
    """Resolve a metric name: binary tasks score F1, multiclass accuracy."""
    if metric == "auto":
        metric = "f1" if num_classes == 2 else "accuracy"
    if metric == "accuracy":
        return "accuracy", accuracy
    if metric == "f1":
        return "f1", lambda pred, gold: f1_binary(pred, gold, positive_class)
    raise ValueError(f"unknown metric {metric!r}")


def fit_method(
    dataset: Dataset,
    method: str,
    seed: int = 0,
    max_iters: int | None = None,
    tol: float | None = None,
    subtypes: int | None = None,
    lanczos_rank: int | None = None,
) -> Posterior:
    """Run one aggregation method with shared knobs mapped onto its config."""
    if method == "mv":
        return majority_vote(dataset)
    iters = {} if max_iters is None else {"max_iters": max_iters}
    if tol is not None:
        iters["tol"] = tol
    if method == "ds":
        return dawid_skene(dataset, **iters)
    if method == "ibcc":
        return ibcc_fit(dataset, seed=seed, **iters)
    if method == "ebcc":
        return ebcc_fit(
            dataset,
            subtypes=subtypes if subtypes is not None else 3,
            seed=seed,
            **iters,
        )
    if method == "fable":
        defaults = FableConfig()
        config = FableConfig(
            subtypes=subtypes if subtypes is not None else defaults.subtypes,
            lanczos_rank=lanczos_rank if lanczos_rank is not None else defaults.lanczos_rank,
            max_iters=max_iters if max_iters is not None else defaults.max_iters,
            tol=tol if tol is not None else defaults.tol,
        )
        return fable_fit(dataset, config, seed=seed)
    raise ValueError(f"unknown method {method!r}")


def size_study(
    sizes,
    runs: int = 10,
    methods=("mv", "ds", "ibcc", "ebcc", "fable"),
    seed: int = 0,
    psi: float = 1.0,
    subtypes: int = 3,
    max_iters: int | None = None,
    lanczos_rank: int | None = None,
) -> list[dict]:
    """Accuracy of each method across dataset sizes, one row per fit.

    Every (size, run) pair gets its own dataset; all methods see the same
    one, so per-run differences are paired.  Run seeds are shared across
    sizes, so each size sweep resamples the same class-std draws at a
    different N and size effects are not confounded with seed effects.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    rows = []
    for size in sizes:
        for run in range(runs):
            trial_seed = seed ^ run
            spec = default_synthetic_spec(size=size, seed=trial_seed, psi=psi)
            dataset = generate_synthetic(spec)
            name, score = select_metric(dataset.num_classes)
            for method in methods:
                posterior = fit_method(
                    dataset,
                    method,
                    seed=trial_seed,
                    subtypes=subtypes,
                    max_iters=max_iters,
                    lanczos_rank=lanczos_rank,
                )
                rows.append(
                    {
                        "method": method,
                        "size": int(size),
                        "run": run,
                        "seed": trial_seed,
                        "metric": name,
                        "value": float(score(posterior.predictions, dataset.gold)),
                        "n_iters": posterior.n_iters,
                    }
                )
    return rows


def summarize_size_study(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation per (method, size), in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    metric = rows[0]["metric"] if rows else "accuracy"
    for row in rows:
        groups.setdefault((row["method"], row["size"]), []).append(row["value"])
    summary = []
    for (method, size), values in groups.items():
        arr = np.asarray(values)
        summary.append(
            {
                "method": method,
                "size": size,
                "runs": len(values),
                "metric": metric,
                "mean": float(arr.mean()),
                "std": float(arr.std()),
            }
        )
    return summary


def correlation_study(
    trials: int = 50,
    size: int = 1000,
    seed: int = 0,
    psi_range: tuple[float, float] = (1.0, 3.0),
    psi=None,
    subtypes: int = 3,
    max_iters: int | None = None,
    lanczos_rank: int | None = None,
) -> tuple[list[dict], float, float]:
    """Relate the feature/LF dependence score to the feature-aware gain.

    Each trial redraws the LF window widths psi (uniform in ``psi_range``
    unless a fixed ``psi`` is given), generates a dataset, computes
    Corr(X, LFs), and fits the subtype model with and without features.
    Returns the per-trial rows plus the Pearson r and p-value between the
    dependence score and the accuracy gain.
    """
    if trials < 3:
        raise ValueError("need at least three trials for a correlation")
    rows = []
    for trial in range(trials):
        trial_seed = seed ^ trial
        if psi is None:
            rng = np.random.default_rng([trial_seed, 3])
            widths = rng.uniform(psi_range[0], psi_range[1], size=8)
        else:
            widths = psi
        spec = default_synthetic_spec(size=size, seed=trial_seed, psi=widths)
        dataset = generate_synthetic(spec)
        name, score = select_metric(dataset.num_classes)
        corr = feature_lf_correlation(dataset)
        ebcc_post = fit_method(
            dataset, "ebcc", seed=trial_seed, subtypes=subtypes, max_iters=max_iters
        )
        fable_post = fit_method(
            dataset,
            "fable",
            seed=trial_seed,
            subtypes=subtypes,
            max_iters=max_iters,
            lanczos_rank=lanczos_rank,
        )
        ebcc_value = float(score(ebcc_post.predictions, dataset.gold))
        fable_value = float(score(fable_post.predictions, dataset.gold))
        rows.append(
            {
                "trial": trial,
                "seed": trial_seed,
                "corr": float(corr),
                "metric": name,
                "ebcc": ebcc_value,
                "fable": fable_value,
                "delta": fable_value - ebcc_value,
            }
        )
    r, p = pearson_r([row["corr"] for row in rows], [row["delta"] for row in rows])
    return rows, r, p
