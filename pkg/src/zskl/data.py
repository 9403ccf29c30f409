"""Datasets for zero-shot learning: loading, preprocessing, splits and synthesis.

Internally features are stored column-major, ``X`` of shape ``(d, N)``, and
class attributes as ``A`` of shape ``(d_attr, C)``.  Class ids are 1-based
everywhere, so the attribute vector of class ``c`` is ``A[:, c - 1]``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError

FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"
ATTRIBUTES_FILE = "attributes.csv"
SPLITS_FILE = "splits.json"
GEN_META_FILE = "gen_meta.json"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SplitSpec:
    """Class-disjoint split of a dataset.

    ``val_classes`` act as surrogate unseen classes during model selection;
    ``seen_test_fraction`` of every train class is held out for the
    generalized protocol.
    """

    train_classes: frozenset
    val_classes: frozenset
    unseen_classes: frozenset
    seen_test_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("train_classes", "val_classes", "unseen_classes"):
            object.__setattr__(self, name, frozenset(int(c) for c in getattr(self, name)))
        if not self.unseen_classes:
            raise DataError("unseen_classes must be non-empty")
        if (self.train_classes & self.val_classes or self.train_classes & self.unseen_classes
                or self.val_classes & self.unseen_classes):
            raise DataError("train/val/unseen class sets must be pairwise disjoint")
        if not 0.0 <= self.seen_test_fraction < 1.0:
            raise DataError("seen_test_fraction must lie in [0, 1)")

    def validate_for(self, n_classes: int) -> None:
        every = self.train_classes | self.val_classes | self.unseen_classes
        bad = sorted(c for c in every if c < 1 or c > n_classes)
        if bad:
            raise DataError(f"split references class ids outside [1..{n_classes}]: {bad}")

    def to_json(self) -> dict:
        return {
            "train_classes": sorted(self.train_classes),
            "val_classes": sorted(self.val_classes),
            "unseen_classes": sorted(self.unseen_classes),
            "seen_test_fraction": float(self.seen_test_fraction),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitSpec":
        try:
            return cls(
                train_classes=obj["train_classes"],
                val_classes=obj.get("val_classes", []),
                unseen_classes=obj["unseen_classes"],
                seen_test_fraction=float(obj.get("seen_test_fraction", 0.0)),
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed split description: {exc!r}") from exc


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    attributes: np.ndarray
    class_names: Optional[tuple] = None
    split: Optional[SplitSpec] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        A = np.asarray(self.attributes, dtype=np.float64)
        labels = np.asarray(self.labels)
        if X.ndim != 2 or A.ndim != 2 or labels.ndim != 1:
            raise DataError("features and attributes must be 2-D, labels 1-D")
        d, n = X.shape
        d_attr, n_classes = A.shape
        if n < 1 or d < 1 or d_attr < 1:
            raise DataError("dataset needs N >= 1, d >= 1 and d_attr >= 1")
        if n_classes < 2:
            raise DataError("dataset needs at least two classes")
        if labels.shape[0] != n:
            raise DataError(f"labels length {labels.shape[0]} != number of samples {n}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.min() < 1 or labels.max() > n_classes:
            raise DataError(
                f"label out of range: labels must lie in [1..{n_classes}], "
                f"got [{labels.min()}..{labels.max()}]")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite entry in features")
        if not np.all(np.isfinite(A)):
            raise DataError("non-finite entry in attributes")
        if self.class_names is not None and len(self.class_names) != n_classes:
            raise DataError("class_names length must equal the number of classes")
        object.__setattr__(self, "features", _frozen(X, np.float64))
        object.__setattr__(self, "attributes", _frozen(A, np.float64))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.split is not None:
            self.split.validate_for(n_classes)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[1]

    def class_indices(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


@dataclass(frozen=True)
class PreprocessStats:
    feature_mean: np.ndarray
    attribute_norms: np.ndarray
    attribute_mean: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "feature_mean", _frozen(self.feature_mean, np.float64))
        object.__setattr__(self, "attribute_norms", _frozen(self.attribute_norms, np.float64))
        if self.attribute_mean is not None:
            object.__setattr__(self, "attribute_mean", _frozen(self.attribute_mean, np.float64))
        if np.any(self.attribute_norms <= 0):
            raise DataError("attribute norms must be strictly positive")


@dataclass(frozen=True)
class Partition:
    """Sample indices (0-based, ascending) for each role of a split."""

    train: np.ndarray
    val: np.ndarray
    seen_test: np.ndarray
    unseen_test: np.ndarray
    spec: SplitSpec = field(repr=False, default=None)

    def sizes(self) -> dict:
        return {k: int(getattr(self, k).size) for k in ("train", "val", "seen_test", "unseen_test")}


# ----------------------------------------------------------------------------
# CSV / JSON io
# ----------------------------------------------------------------------------

def _read_rows(path: Path) -> list:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]


def _parse_matrix(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path.name}: empty file")
    width = len(rows[0])
    out = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path.name}: malformed CSV row {i + 1}: expected {width} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path.name}: malformed CSV row {i + 1}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path.name}: non-finite entry at row {i + 1}, column {j + 1}")
            out[i, j] = v
    return out


def _parse_labels(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    labels = []
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise DataError(f"{path.name}: malformed CSV row {i + 1}: expected one label")
        try:
            labels.append(int(row[0].strip()))
        except ValueError:
            raise DataError(f"{path.name}: malformed label {row[0]!r} at row {i + 1}") from None
    return np.asarray(labels, dtype=np.int64)


def load_dataset(dir_path) -> Dataset:
    """Read ``features.csv``, ``labels.csv``, ``attributes.csv`` and the optional ``splits.json``."""
    root = Path(dir_path)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    feats = _parse_matrix(root / FEATURES_FILE)
    labels = _parse_labels(root / LABELS_FILE)
    attrs = _parse_matrix(root / ATTRIBUTES_FILE)
    if labels.shape[0] != feats.shape[0]:
        raise DataError(f"dimension mismatch: {labels.shape[0]} labels for {feats.shape[0]} feature rows")
    if labels.size and (labels.min() < 1 or labels.max() > attrs.shape[0]):
        raise DataError(
            f"label out of range: labels must lie in [1..{attrs.shape[0]}], "
            f"got [{labels.min()}..{labels.max()}]")
    split = None
    split_path = root / SPLITS_FILE
    if split_path.is_file():
        try:
            split = SplitSpec.from_json(json.loads(split_path.read_text()))
        except json.JSONDecodeError as exc:
            raise DataError(f"{SPLITS_FILE}: invalid JSON ({exc})") from exc
    return Dataset(features=feats.T, labels=labels, attributes=attrs.T, split=split)


def _fmt(v) -> str:
    # repr of a Python float is the shortest string that round-trips
    return repr(float(v))


def save_dataset(ds: Dataset, dir_path) -> Path:
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / FEATURES_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for col in ds.features.T:
            w.writerow([_fmt(v) for v in col])
    with open(root / LABELS_FILE, "w", newline="") as fh:
        fh.writelines(f"{int(l)}\n" for l in ds.labels)
    with open(root / ATTRIBUTES_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for col in ds.attributes.T:
            w.writerow([_fmt(v) for v in col])
    if ds.split is not None:
        (root / SPLITS_FILE).write_text(json.dumps(ds.split.to_json(), indent=2) + "\n")
    return root


# ----------------------------------------------------------------------------
# preprocessing
# ----------------------------------------------------------------------------

def _shifted_mean(M):
    # column mean about the first column: exact when all columns are equal
    ref = M[:, 0]
    return ref + (M - ref[:, None]).mean(axis=1)


def preprocess(ds: Dataset, train_classes: Iterable[int], samples: Optional[Sequence[int]] = None,
               center_attributes: bool = True):
    """Mean-centre features and l2-normalise attribute columns.

    The mean is taken over samples of ``train_classes`` (or over the explicit
    ``samples`` indices when given) and subtracted from every sample.  With
    ``center_attributes`` the attribute vectors are centred too, by the mean
    of the replicated attributes of those same samples, before normalising.
    Without centring, features and attributes disagree by a constant offset
    that no linear projection can absorb in both directions.
    """
    train_classes = set(int(c) for c in train_classes)
    if samples is None:
        for c in train_classes:
            if not np.any(ds.labels == c):
                raise DataError(f"train class {c} has no samples")
        idx = np.flatnonzero(np.isin(ds.labels, list(train_classes)))
    else:
        idx = np.asarray(samples, dtype=np.int64)
    if idx.size == 0:
        raise DataError("no samples to compute the feature mean from")
    mean = _shifted_mean(ds.features[:, idx])
    attr_mean = None
    A = ds.attributes
    if center_attributes:
        attr_mean = _shifted_mean(ds.attributes[:, ds.labels[idx] - 1])
        A = A - attr_mean[:, None]
    norms = np.linalg.norm(A, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DataError(f"attribute column with zero norm for class ids {(zero + 1).tolist()}")
    stats = PreprocessStats(feature_mean=mean, attribute_norms=norms, attribute_mean=attr_mean)
    return apply_preprocess(ds, stats), stats


def apply_preprocess(ds: Dataset, stats: PreprocessStats) -> Dataset:
    """Apply previously computed statistics to a raw dataset."""
    if stats.feature_mean.shape[0] != ds.dim:
        raise DataError("feature mean length does not match the feature dimension")
    A = ds.attributes
    if stats.attribute_mean is not None:
        if stats.attribute_mean.shape[0] != ds.attr_dim:
            raise DataError("attribute mean length does not match the attribute dimension")
        A = A - stats.attribute_mean[:, None]
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise DataError("attribute column with zero norm")
    return replace(
        ds,
        features=ds.features - stats.feature_mean[:, None],
        attributes=A / norms[None, :],
    )


def replicate_attributes(ds: Dataset) -> np.ndarray:
    """Per-sample attribute matrix ``Y`` (d_attr x N): column i is the attribute of ``labels[i]``."""
    return ds.attributes[:, ds.labels - 1]


# ----------------------------------------------------------------------------
# splits
# ----------------------------------------------------------------------------

def apply_split(ds: Dataset, spec: Optional[SplitSpec] = None) -> Partition:
    spec = spec if spec is not None else ds.split
    if spec is None:
        raise DataError("dataset has no split and none was given")
    spec.validate_for(ds.n_classes)
    rng = np.random.default_rng(spec.seed)
    train, held = [], []
    for c in sorted(spec.train_classes):
        members = ds.class_indices(c)
        n_hold = int(math.floor(spec.seen_test_fraction * members.size))
        if members.size - n_hold < 1:
            raise DataError(f"train class {c} has no samples left after the seen-test holdout")
        order = rng.permutation(members.size)
        held.append(members[order[:n_hold]])
        train.append(members[order[n_hold:]])

    def _cat(parts):
        return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)

    val = np.flatnonzero(np.isin(ds.labels, sorted(spec.val_classes)))
    unseen = np.flatnonzero(np.isin(ds.labels, sorted(spec.unseen_classes)))
    return Partition(train=_cat(train), val=val, seen_test=_cat(held), unseen_test=unseen, spec=spec)


def subset(ds: Dataset, indices) -> Dataset:
    """Dataset restricted to the given sample indices (attributes kept whole)."""
    idx = np.asarray(indices, dtype=np.int64)
    return replace(ds, features=ds.features[:, idx], labels=ds.labels[idx])


# ----------------------------------------------------------------------------
# synthetic data
# ----------------------------------------------------------------------------

def generate_synthetic(n_classes: int, per_class: int, d: int, d_attr: int,
                       noise_sigma: float, seed: int, return_lift: bool = False):
    """Draw a linearly lifted attribute dataset.

    Attributes are standard normal, l2-normalised per class.  A lift ``G``
    with orthonormal columns maps them into feature space and every sample
    of class ``c`` is ``G @ a_c`` plus isotropic Gaussian noise.
    """
    if d < d_attr:
        raise DataError(f"feature dimension {d} must be >= attribute dimension {d_attr}")
    if d_attr < 1 or n_classes < 2 or per_class < 1:
        raise DataError("need d_attr >= 1, n_classes >= 2 and per_class >= 1")
    if noise_sigma < 0:
        raise DataError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d_attr, n_classes))
    A /= np.linalg.norm(A, axis=0, keepdims=True)
    G, _ = np.linalg.qr(rng.standard_normal((d, d_attr)))
    labels = np.repeat(np.arange(1, n_classes + 1), per_class)
    X = (G @ A)[:, labels - 1]
    if noise_sigma > 0:
        X = X + noise_sigma * rng.standard_normal(X.shape)
    ds = Dataset(features=X, labels=labels, attributes=A)
    return (ds, G) if return_lift else ds


def class_split(n_classes: int, train_frac: float, val_frac: float, seed: int,
                seen_test_fraction: float = 0.0) -> SplitSpec:
    """Random class-disjoint split with ``round(frac * C)`` train and val classes."""
    n_train = int(round(train_frac * n_classes))
    n_val = int(round(val_frac * n_classes))
    if n_train < 1 or n_train + n_val >= n_classes:
        raise DataError("class fractions leave no train or no unseen classes")
    order = np.random.default_rng(seed).permutation(n_classes) + 1
    return SplitSpec(
        train_classes=order[:n_train].tolist(),
        val_classes=order[n_train:n_train + n_val].tolist(),
        unseen_classes=order[n_train + n_val:].tolist(),
        seen_test_fraction=seen_test_fraction,
        seed=seed,
    )


def write_synthetic(out_dir, n_classes: int, per_class: int, d: int, d_attr: int,
                    noise_sigma: float, seed: int, train_frac: float = 0.6,
                    val_frac: float = 0.2, seen_test_fraction: float = 0.2) -> Dataset:
    ds = generate_synthetic(n_classes, per_class, d, d_attr, noise_sigma, seed)
    split = class_split(n_classes, train_frac, val_frac, seed, seen_test_fraction)
    ds = replace(ds, split=split)
    root = save_dataset(ds, out_dir)
    meta = {
        "n_classes": n_classes, "per_class": per_class, "d": d, "d_attr": d_attr,
        "noise_sigma": noise_sigma, "seed": seed, "train_frac": train_frac,
        "val_frac": val_frac, "seen_test_fraction": seen_test_fraction,
    }
    (root / GEN_META_FILE).write_text(json.dumps(meta, indent=2) + "\n")
    return ds


def prepare(ds: Dataset, spec: Optional[SplitSpec] = None, center_attributes: bool = True):
    """Split, then preprocess with the mean of the training samples.

    Returns ``(preprocessed dataset, stats, partition)``.
    """
    part = apply_split(ds, spec)
    pds, stats = preprocess(ds, part.spec.train_classes, samples=part.train,
                            center_attributes=center_attributes)
    return pds, stats, part
