"""Pre-embedded dataset ingestion, label masking, CV folds and sampling.

File format (UTF-8, LF): a header line ``# name=<string> d=<count>`` followed
by one sample per line, ``id,label,f0,f1,...,f{d-1}``. Sample ids are the
0-based row order of the file; every random decision downstream is keyed to
these ids, so a dataset loaded twice splits identically.

An optional sidecar manifest ``<file>.manifest.json`` carries
``{"name", "n", "d", "n_classes", "task"}`` for reporting.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .numerics import Rng, check_finite

SIZE_MODES = ("x", "2x", "x_half", "x_third_disjoint")

# fixed child-stream ids inside make_semi_split
_STREAM_FOLDS = 0
_STREAM_MASK = 1


@dataclass
class Dataset:
    name: str
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    n_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.features.shape[0]
        if n < 1 or self.features.ndim != 2 or self.features.shape[1] < 1:
            raise DataError(f"dataset {self.name!r}: need n >= 1 and d >= 1")
        if self.labels.shape != (n,):
            raise DataError(f"dataset {self.name!r}: labels length != n rows")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise DataError(f"dataset {self.name!r}: labels outside [0, {self.n_classes})")
        present = np.bincount(self.labels, minlength=self.n_classes)
        missing = np.where(present == 0)[0]
        if missing.size:
            raise DataError(f"dataset {self.name!r}: class {missing[0]} has no samples")
        check_finite(self.features, f"dataset {self.name!r} features")

    @property
    def n(self):
        return len(self.labels)

    @property
    def d(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass
class SemiSplit:
    """Disjoint labeled (D), unlabeled (U) and test index sets of one fold."""

    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test_idx: np.ndarray
    unlabeled_rate: float

    def __post_init__(self):
        sets = [set(self.labeled_idx), set(self.unlabeled_idx), set(self.test_idx)]
        total = len(self.labeled_idx) + len(self.unlabeled_idx) + len(self.test_idx)
        if len(sets[0] | sets[1] | sets[2]) != total:
            raise DataError("split index sets overlap")


@dataclass
class FeatureSplit:
    """Two disjoint half-open column ranges covering all features."""

    view_a: tuple[int, int]
    view_b: tuple[int, int]


@dataclass
class SamplingStrategy:
    """Bootstrap size/replacement policy for the three-model initial fits."""

    size_mode: str = "x"
    with_replacement: bool = False

    def __post_init__(self):
        if self.size_mode not in SIZE_MODES:
            raise ConfigError(f"unknown size_mode {self.size_mode!r}, expected one of {SIZE_MODES}")
        if self.size_mode == "x_third_disjoint" and self.with_replacement:
            raise ConfigError("x_third_disjoint requires with_replacement=False")
        if self.size_mode == "2x" and not self.with_replacement:
            raise ConfigError("2x draws exceed the pool; with_replacement must be True")

    def label(self):
        repl = {"x_third_disjoint": "nointer"}.get(self.size_mode)
        if repl is None:
            repl = "repl" if self.with_replacement else "norepl"
        return f"{self.size_mode}+{repl}"


def load_csv(path):
    """Parse a dataset file; n_classes is inferred as max label + 1."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DataError(f"{path}: missing '# name=... d=...' header line")
    header = {}
    for tok in lines[0].lstrip("#").split():
        if "=" not in tok:
            raise DataError(f"{path}: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        header[k] = v
    if "name" not in header or "d" not in header:
        raise DataError(f"{path}: header must define name= and d=")
    try:
        d = int(header["d"])
    except ValueError:
        raise DataError(f"{path}: header d={header['d']!r} is not an integer")
    features, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 + d:
            raise DataError(f"{path}:{lineno}: expected {2 + d} fields, got {len(parts)}")
        try:
            int(parts[0])
            label = int(parts[1])
            row = [float(v) for v in parts[2:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}")
        if label < 0:
            raise DataError(f"{path}:{lineno}: negative label {label}")
        labels.append(label)
        features.append(row)
    if not labels:
        raise DataError(f"{path}: no samples")
    return Dataset(
        name=header["name"],
        features=np.array(features, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        n_classes=max(labels) + 1,
    )


def save_csv(ds: Dataset, path):
    """Write a Dataset in the load_csv format (row index as id)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# name={ds.name} d={ds.d}\n")
        for i in range(ds.n):
            feats = ",".join(repr(float(v)) for v in ds.features[i])
            fh.write(f"{i},{ds.labels[i]},{feats}\n")


def manifest_path(data_path):
    return str(data_path) + ".manifest.json"


def write_manifest(ds: Dataset, data_path, task=""):
    payload = {"name": ds.name, "n": ds.n, "d": ds.d, "n_classes": ds.n_classes, "task": task}
    with open(manifest_path(data_path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_manifest(data_path):
    p = manifest_path(data_path)
    if not os.path.exists(p):
        return None
    with open(p, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _stratified_fold_of(ds: Dataset, n_folds, rng: Rng):
    """Fold id per sample; per-class counts differ from exact share by <= 1."""
    fold_of = np.empty(ds.n, dtype=np.int64)
    for c in range(ds.n_classes):
        ids = np.where(ds.labels == c)[0]
        if len(ids) < n_folds:
            raise DataError(f"class {c} has {len(ids)} samples, fewer than {n_folds} folds")
        perm = ids[rng.child(c).permutation(len(ids))]
        for f, chunk in enumerate(np.array_split(perm, n_folds)):
            fold_of[chunk] = f
    return fold_of


def _mask_quotas(counts, target, caps):
    """Largest-remainder apportionment of ``target`` across classes.

    Per-class quota is proportional to class size, floored, remainder
    distributed by largest fractional part, capped at ``caps`` so every
    class keeps at least one labeled sample.
    """
    total = counts.sum()
    exact = counts * (target / total) if total else np.zeros_like(counts, dtype=float)
    quota = np.minimum(np.floor(exact).astype(np.int64), caps)
    room = caps - quota
    frac = exact - np.floor(exact)
    shortfall = target - quota.sum()
    # hand out remaining units to classes with room, largest remainder first
    for c in sorted(range(len(counts)), key=lambda c: (-frac[c], c)):
        if shortfall <= 0:
            break
        take = min(int(room[c]), shortfall)
        quota[c] += take
        shortfall -= take
    return quota


def make_semi_split(ds: Dataset, unlabeled_rate, fold, n_folds, rng: Rng):
    """Stratified k-fold split with stratified label masking in the train part.

    Fold assignment consumes a fixed child stream of ``rng``, so every call
    with the same seed sees the same partition regardless of ``fold`` or
    ``unlabeled_rate``; masking consumes a (fold, rate)-keyed child stream.
    Rate 0 yields an empty U (the fully-labeled condition).
    """
    if n_folds < 2:
        raise ConfigError(f"n_folds must be >= 2, got {n_folds}")
    if not 0 <= fold < n_folds:
        raise ConfigError(f"fold {fold} out of range for {n_folds} folds")
    if not 0.0 <= unlabeled_rate < 1.0:
        raise ConfigError(f"unlabeled_rate must lie in [0, 1), got {unlabeled_rate}")

    fold_of = _stratified_fold_of(ds, n_folds, rng.child(_STREAM_FOLDS))
    test_idx = np.where(fold_of == fold)[0]
    train_idx = np.where(fold_of != fold)[0]

    if unlabeled_rate == 0.0:
        return SemiSplit(train_idx, np.array([], dtype=np.int64), test_idx, 0.0)

    rate_key = int(round(unlabeled_rate * 10**6))
    mask_rng = rng.child(_STREAM_MASK).child(fold).child(rate_key)
    counts = np.bincount(ds.labels[train_idx], minlength=ds.n_classes)
    target = int(round(unlabeled_rate * len(train_idx)))
    quota = _mask_quotas(counts, target, caps=np.maximum(counts - 1, 0))

    unlabeled = []
    for c in range(ds.n_classes):
        ids = train_idx[ds.labels[train_idx] == c]
        perm = ids[mask_rng.child(c).permutation(len(ids))]
        unlabeled.append(perm[: quota[c]])
    unlabeled_idx = np.sort(np.concatenate(unlabeled))
    labeled_idx = np.setdiff1d(train_idx, unlabeled_idx)
    return SemiSplit(labeled_idx, unlabeled_idx, test_idx, unlabeled_rate)


def split_features(ds: Dataset):
    """Halve the feature columns; an odd column count favors the second view."""
    if ds.d < 2:
        raise ValueError(f"need d >= 2 to split features, got d={ds.d}")
    half = ds.d // 2
    return FeatureSplit(view_a=(0, half), view_b=(half, ds.d))


def bootstrap_sample(labeled_idx, strategy: SamplingStrategy, model_slot, rng: Rng):
    """Initial-training sample for one of the three model slots.

    Sizes per mode: x, 2x, floor(x/2); ``x_third_disjoint`` splits one shared
    permutation of the pool into three disjoint slices (sizes within 1 of
    x/3) so the slots partition the labeled set.
    """
    labeled_idx = np.asarray(labeled_idx)
    x = len(labeled_idx)
    if x < 3:
        raise ValueError(f"need at least 3 labeled samples, got {x}")
    if not 0 <= model_slot <= 2:
        raise ValueError(f"model_slot must be 0..2, got {model_slot}")
    if strategy.size_mode in ("x_half", "x_third_disjoint") and x < 6:
        raise ValueError(f"{strategy.size_mode} needs x >= 6, got {x}")

    if strategy.size_mode == "x_third_disjoint":
        # same permutation for every slot: derived from the parent, not drawn
        perm = labeled_idx[rng.child(3).permutation(x)]
        return np.array_split(perm, 3)[model_slot]

    size = {"x": x, "2x": 2 * x, "x_half": x // 2}[strategy.size_mode]
    slot_rng = rng.child(model_slot)
    picks = slot_rng.choice(x, size, replace=strategy.with_replacement)
    return labeled_idx[picks]
