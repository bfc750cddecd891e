"""Dataset container, serialization, and the synthetic benchmark generator.

A dataset couples per-item feature vectors with the votes of L labeling
functions.  Votes live in {0..K-1} with ``ABSTAIN`` (-1) marking items a
labeling function declined to vote on.  Everything downstream treats the
collection transductively: models see all items at once and there is no
train/test split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ABSTAIN",
    "DatasetError",
    "Dataset",
    "ValidationReport",
    "validate",
    "load_json",
    "save_json",
    "load_csv",
    "SyntheticSpec",
    "default_synthetic_spec",
    "generate_synthetic",
]

# sentinel vote meaning "no opinion"; kept as -1 so vote arrays stay integer
ABSTAIN = -1

# salts separating the RNG streams used for drawing a spec's widths/stds
# from the stream used for sampling the data itself
_SPEC_STREAM = 1
_DATA_STREAM = 2


class DatasetError(ValueError):
    """Malformed or inconsistent dataset content."""


@dataclass(eq=False)
class Dataset:
    """Feature matrix plus labeling-function votes for N items.

    ``gold`` carries the true labels when known (synthetic data, labeled
    benchmarks) and is only used for evaluation, never by the models.
    ``ids`` preserves the item identifiers of a source file; when absent,
    zero-padded row indices are used on save.
    """

    features: np.ndarray
    lf_labels: np.ndarray
    num_classes: int
    gold: np.ndarray | None = None
    name: str = ""
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.lf_labels = np.asarray(self.lf_labels, dtype=np.int64)
        self.num_classes = int(self.num_classes)
        if self.gold is not None:
            self.gold = np.asarray(self.gold, dtype=np.int64)
        if self.ids is not None:
            self.ids = tuple(str(i) for i in self.ids)
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D array")
        if self.lf_labels.ndim != 2:
            raise DatasetError("lf_labels must be a 2-D array")
        if self.features.shape[0] != self.lf_labels.shape[0]:
            raise DatasetError("features and lf_labels must cover the same items")

    @property
    def n_items(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_lfs(self) -> int:
        return self.lf_labels.shape[1]


@dataclass(frozen=True)
class ValidationReport:
    """Summary statistics produced by :func:`validate`."""

    n_items: int
    n_lfs: int
    n_features: int
    num_classes: int
    coverage: np.ndarray
    all_abstain_items: int
    has_gold: bool
    gold_balance: np.ndarray | None


def validate(dataset: Dataset) -> ValidationReport:
    """Check every dataset invariant; raise DatasetError on violation."""
    if dataset.n_items < 1:
        raise DatasetError("dataset must contain at least one item")
    if dataset.num_classes < 2:
        raise DatasetError("need at least two classes")
    if not np.all(np.isfinite(dataset.features)):
        raise DatasetError("features must be finite")
    votes = dataset.lf_labels
    bad = (votes != ABSTAIN) & ((votes < 0) | (votes >= dataset.num_classes))
    if np.any(bad):
        raise DatasetError("labeling-function votes out of range")
    if dataset.gold is not None:
        if dataset.gold.shape != (dataset.n_items,):
            raise DatasetError("gold labels must have one entry per item")
        if np.any((dataset.gold < 0) | (dataset.gold >= dataset.num_classes)):
            raise DatasetError("gold labels out of range")
    if dataset.ids is not None:
        if len(dataset.ids) != dataset.n_items:
            raise DatasetError("ids must have one entry per item")
        if len(set(dataset.ids)) != dataset.n_items:
            raise DatasetError("ids must be unique")
    covered = votes != ABSTAIN
    coverage = covered.mean(axis=0) if dataset.n_lfs else np.zeros(0)
    balance = None
    if dataset.gold is not None:
        balance = np.bincount(dataset.gold, minlength=dataset.num_classes)
    return ValidationReport(
        n_items=dataset.n_items,
        n_lfs=dataset.n_lfs,
        n_features=dataset.n_features,
        num_classes=dataset.num_classes,
        coverage=coverage,
        all_abstain_items=int((~covered.any(axis=1)).sum()),
        has_gold=dataset.gold is not None,
        gold_balance=balance,
    )


def load_json(path, num_classes: int | None = None, name: str | None = None) -> Dataset:
    """Read a dataset from the JSON weak-label interchange format.

    The file is one object mapping item id to an entry with ``label``
    (int or null), ``weak_labels`` (list of ints, -1 = abstain) and
    ``data.feature`` (list of floats).  Item ids sorted lexicographically
    define row order.  Gold labels are kept only when every item has one.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, dict) or not raw:
        raise DatasetError(f"{path}: expected a nonempty object of items")

    ids = sorted(raw)
    features, votes, labels = [], [], []
    for item_id in ids:
        entry = raw[item_id]
        if not isinstance(entry, dict):
            raise DatasetError(f"{path}: item {item_id!r} is not an object")
        try:
            weak = entry["weak_labels"]
            feat = entry["data"]["feature"]
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: item {item_id!r} missing {exc}") from exc
        votes.append(weak)
        features.append(feat)
        labels.append(entry.get("label"))

    n_lf = len(votes[0])
    n_feat = len(features[0])
    if any(len(w) != n_lf for w in votes):
        raise DatasetError(f"{path}: ragged weak_labels rows")
    if any(len(f) != n_feat for f in features):
        raise DatasetError(f"{path}: ragged feature rows")

    gold = None
    if all(lab is not None for lab in labels):
        gold = np.asarray(labels, dtype=np.int64)
    votes_arr = np.asarray(votes, dtype=np.int64)
    if num_classes is None:
        observed = votes_arr[votes_arr != ABSTAIN]
        candidates = [observed.max() + 1 if observed.size else 0]
        if gold is not None and gold.size:
            candidates.append(int(gold.max()) + 1)
        num_classes = max(candidates)
        if num_classes < 2:
            raise DatasetError(f"{path}: cannot infer the number of classes")
    dataset = Dataset(
        features=np.asarray(features, dtype=float),
        lf_labels=votes_arr,
        num_classes=num_classes,
        gold=gold,
        name=name if name is not None else path.stem,
        ids=tuple(ids),
    )
    validate(dataset)
    return dataset


def save_json(dataset: Dataset, path) -> None:
    """Write the canonical JSON form (sorted ids, two-space indent).

    Loading the result reproduces the dataset exactly; saving it again
    reproduces the file byte for byte.
    """
    validate(dataset)
    ids = dataset.ids
    if ids is None:
        ids = tuple(f"{i:08d}" for i in range(dataset.n_items))
    elif list(ids) != sorted(ids):
        raise DatasetError("item ids must be lexicographically sorted to save")
    payload = {}
    for row, item_id in enumerate(ids):
        payload[item_id] = {
            "label": int(dataset.gold[row]) if dataset.gold is not None else None,
            "weak_labels": [int(v) for v in dataset.lf_labels[row]],
            "data": {"feature": [float(v) for v in dataset.features[row]]},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_int_csv(path, what: str) -> np.ndarray:
    values = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    rounded = np.rint(values)
    if not np.all(np.isfinite(values)) or np.any(np.abs(values - rounded) > 0):
        raise DatasetError(f"{what} must contain integers")
    return rounded.astype(np.int64)


def load_csv(
    features_path,
    labels_path,
    gold_path=None,
    num_classes: int | None = None,
    name: str = "",
) -> Dataset:
    """Read the CSV alternative: features, votes, and optional gold labels.

    ``features_path`` holds one row of floats per item, ``labels_path``
    one row of votes per item (-1 = abstain), ``gold_path`` one true
    label per line.
    """
    try:
        features = np.loadtxt(features_path, delimiter=",", ndmin=2, dtype=float)
        votes = _load_int_csv(labels_path, "labels")
        gold = None
        if gold_path is not None:
            gold = _load_int_csv(gold_path, "gold").reshape(-1)
    except (OSError, ValueError) as exc:
        if isinstance(exc, DatasetError):
            raise
        raise DatasetError(f"could not parse CSV input ({exc})") from exc
    if num_classes is None:
        observed = votes[votes != ABSTAIN]
        candidates = [observed.max() + 1 if observed.size else 0]
        if gold is not None and gold.size:
            candidates.append(int(gold.max()) + 1)
        num_classes = max(candidates)
        if num_classes < 2:
            raise DatasetError("cannot infer the number of classes")
    dataset = Dataset(
        features=features,
        lf_labels=votes,
        num_classes=num_classes,
        gold=gold,
        name=name,
    )
    validate(dataset)
    return dataset


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for the seeded Gaussian-mixture benchmark.

    Items are drawn from one 2-D Gaussian per class with equal class
    proportions; each class contributes two unipolar labeling functions,
    one per feature dimension.  LF ``(c, k)`` votes ``c`` exactly when the
    item's k-th coordinate falls inside mean +- psi * std of class ``c``
    in that dimension, and abstains otherwise; ``psi`` holds one width
    multiplier per LF, ordered class-major.
    """

    num_classes: int
    dims: int
    class_means: tuple
    class_stds: tuple
    psi: tuple
    size: int
    seed: int
    name: str = "synthetic"

    def __post_init__(self):
        if self.dims != 2:
            raise DatasetError("the unipolar design uses exactly 2 feature dimensions")
        if self.num_classes < 2:
            raise DatasetError("need at least two classes")
        if self.size < self.num_classes:
            raise DatasetError("need at least one item per class")
        means = np.asarray(self.class_means, dtype=float)
        stds = np.asarray(self.class_stds, dtype=float)
        if means.shape != (self.num_classes, self.dims):
            raise DatasetError("class_means must be (num_classes, dims)")
        if stds.shape != (self.num_classes, self.dims):
            raise DatasetError("class_stds must be (num_classes, dims)")
        if np.any(stds <= 0):
            raise DatasetError("class_stds must be positive")
        psi = np.asarray(self.psi, dtype=float)
        if psi.shape != (2 * self.num_classes,):
            raise DatasetError("psi must hold one width per labeling function")
        if np.any(psi <= 0):
            raise DatasetError("psi entries must be positive")


def default_synthetic_spec(size: int, seed: int, psi=None) -> SyntheticSpec:
    """The four-class benchmark layout: means at (+-1.4, +-1.4), stds ~ U(0.8, 1.6).

    ``psi`` may be None (all widths 1), a scalar, or one value per LF.
    The stds are drawn from a stream derived from ``seed`` that is
    separate from the data-sampling stream.  The mean separation keeps
    the class clusters substantially overlapping so labeling-function
    correctness is genuinely noisy given features; with wide separation
    correctness becomes a near-deterministic function of position and
    the feature/correctness dependence stops varying across window
    widths.
    """
    means = ((1.4, 1.4), (1.4, -1.4), (-1.4, 1.4), (-1.4, -1.4))
    rng = np.random.default_rng([seed, _SPEC_STREAM])
    stds = rng.uniform(0.8, 1.6, size=(4, 2))
    if psi is None:
        psi_arr = np.ones(8)
    else:
        psi_arr = np.asarray(psi, dtype=float)
        if psi_arr.ndim == 0:
            psi_arr = np.full(8, float(psi_arr))
    return SyntheticSpec(
        num_classes=4,
        dims=2,
        class_means=means,
        class_stds=tuple(tuple(row) for row in stds),
        psi=tuple(psi_arr),
        size=size,
        seed=seed,
        name=f"synthetic-n{size}-s{seed}",
    )


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Sample a dataset from the spec; fully determined by ``spec.seed``.

    Class sizes are balanced, with any remainder going to the lowest
    class indices.  Items are laid out class by class.
    """
    k = spec.num_classes
    means = np.asarray(spec.class_means, dtype=float)
    stds = np.asarray(spec.class_stds, dtype=float)
    base, extra = divmod(spec.size, k)
    counts = np.full(k, base, dtype=int)
    counts[:extra] += 1

    rng = np.random.default_rng([spec.seed, _DATA_STREAM])
    feature_blocks = []
    gold_blocks = []
    for c in range(k):
        feature_blocks.append(
            means[c] + stds[c] * rng.standard_normal((counts[c], spec.dims))
        )
        gold_blocks.append(np.full(counts[c], c, dtype=np.int64))
    features = np.concatenate(feature_blocks, axis=0)
    gold = np.concatenate(gold_blocks)

    n_lfs = 2 * k
    votes = np.full((spec.size, n_lfs), ABSTAIN, dtype=np.int64)
    for c in range(k):
        for dim in range(spec.dims):
            j = c * spec.dims + dim
            width = spec.psi[j] * stds[c, dim]
            lo = means[c, dim] - width
            hi = means[c, dim] + width
            inside = (features[:, dim] > lo) & (features[:, dim] < hi)
            votes[inside, j] = c

    return Dataset(
        features=features,
        lf_labels=votes,
        num_classes=k,
        gold=gold,
        name=spec.name,
    )
