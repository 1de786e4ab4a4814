"""Tabular datasets: CSV I/O, normalization and stratified fold plans."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._validation import DatasetError, as_vector, check_positive_int, check_seed

RAW = "raw"
ZSCORED = "zscored"


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """A numeric feature matrix with class labels.

    Arrays are copied and made read-only on construction, so a Dataset can be
    shared freely between evaluation tasks.
    """

    features: np.ndarray
    labels: np.ndarray
    attr_names: tuple
    normalization_state: str = RAW
    label_name: str = "label"
    name: str = "dataset"

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {features.shape}")
        n, d = features.shape
        if n < 2 or d < 1:
            raise DatasetError(f"need at least 2 records and 1 attribute, got {n}x{d}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain non-finite values")
        labels = np.asarray(self.labels).astype(str)
        if labels.shape != (n,):
            raise DatasetError(f"labels length {labels.shape} does not match {n} records")
        names = tuple(str(a) for a in self.attr_names)
        if len(names) != d:
            raise DatasetError(f"{len(names)} attribute names for {d} columns")
        if len(set(names)) != d:
            raise DatasetError(f"duplicate attribute names in {names}")
        if self.normalization_state not in (RAW, ZSCORED):
            raise DatasetError(f"unknown normalization state {self.normalization_state!r}")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "attr_names", names)

    @property
    def n_records(self):
        return self.features.shape[0]

    @property
    def n_attrs(self):
        return self.features.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def with_features(self, features, **changes):
        """Copy of this dataset with the feature matrix replaced."""
        kwargs = dict(
            labels=self.labels,
            attr_names=self.attr_names,
            normalization_state=self.normalization_state,
            label_name=self.label_name,
            name=self.name,
        )
        kwargs.update(changes)
        return Dataset(features=features, **kwargs)


@dataclass(frozen=True, eq=False)
class SplitPlan:
    fold_assignments: np.ndarray
    n_folds: int
    seed: int

    def __post_init__(self):
        folds = np.asarray(self.fold_assignments, dtype=np.int64)
        if folds.ndim != 1:
            raise DatasetError("fold assignments must be a vector")
        if folds.min() < 0 or folds.max() >= self.n_folds:
            raise DatasetError(f"fold index outside [0, {self.n_folds})")
        object.__setattr__(self, "fold_assignments", _frozen(folds))

    def split(self):
        """Yield ``(train_idx, test_idx)`` pairs, one per fold."""
        for k in range(self.n_folds):
            test = self.fold_assignments == k
            yield np.flatnonzero(~test), np.flatnonzero(test)


def _resolve_label(header, label_column):
    if isinstance(label_column, int) and not isinstance(label_column, bool):
        idx = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= idx < len(header):
            raise DatasetError(f"label column index {label_column} out of range")
        return idx
    if label_column in header:
        if header.count(label_column) > 1:
            raise DatasetError(f"label column {label_column!r} is ambiguous")
        return header.index(label_column)
    raise DatasetError(f"label column {label_column!r} not in header {header}")


def load_csv(path, label_column, name=None):
    """Read a comma-separated file with a header row into a raw Dataset.

    ``label_column`` is a header name or a column index. Every other column
    must hold finite reals. Labels are kept verbatim as strings.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    label_idx = _resolve_label(header, label_column)
    attr_names = [h for i, h in enumerate(header) if i != label_idx]
    if len(set(attr_names)) != len(attr_names):
        dupes = sorted({a for a in attr_names if attr_names.count(a) > 1})
        raise DatasetError(f"{path}: duplicate attribute names {dupes}")
    body = rows[1:]
    if len(body) < 2:
        raise DatasetError(f"{path}: need at least 2 records, found {len(body)}")

    features = np.empty((len(body), len(attr_names)))
    labels = []
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DatasetError(
                f"{path}: row {r} has {len(row)} cells, header has {len(header)}"
            )
        j = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                labels.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: row {r}, column {header[c]!r}: cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(value):
                raise DatasetError(f"{path}: row {r}, column {header[c]!r}: non-finite {cell!r}")
            features[r - 1, j] = value
            j += 1
    return Dataset(
        features=features,
        labels=np.array(labels),
        attr_names=tuple(attr_names),
        label_name=header[label_idx],
        name=name or path.stem,
    )


def format_float(value):
    return repr(float(value))


def write_csv(data, path, labels=None, attr_names=None, label_name=None):
    """Write a Dataset (or any object with ``features``) as CSV, label column last.

    Floats are written with ``repr`` so reading the file back is exact.
    """
    features = np.asarray(getattr(data, "features", data), dtype=np.float64)
    labels = getattr(data, "labels", None) if labels is None else labels
    attr_names = attr_names or getattr(data, "attr_names", None) or [
        f"x{j}" for j in range(features.shape[1])
    ]
    label_name = label_name or getattr(data, "label_name", "label")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(attr_names) + ([label_name] if labels is not None else []))
        for i, row in enumerate(features):
            cells = [format_float(v) for v in row]
            if labels is not None:
                cells.append(str(labels[i]))
            writer.writerow(cells)
    return path


def zscore_normalize(d):
    """Standardize every column to zero mean and unit population std.

    Constant columns become all zeros.
    """
    if d.normalization_state != RAW:
        raise DatasetError(f"dataset {d.name!r} is already {d.normalization_state}")
    X = d.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # identical values can still give a rounding-sized std, and a subnormal
    # range can give std == 0; both count as constant
    constant = (X.max(axis=0) == X.min(axis=0)) | (std == 0)
    Z = np.where(constant, 0.0, (X - mean) / np.where(constant, 1.0, std))
    return d.with_features(Z, normalization_state=ZSCORED)


def minmax_to_unit(v):
    """Affinely map a vector onto [0, 1]; a constant vector maps to 0.5."""
    v = as_vector(v, "v")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full_like(v, 0.5)
    out = (v - lo) / (hi - lo)
    # pin the endpoints against rounding
    out[v == lo] = 0.0
    out[v == hi] = 1.0
    return out


def stratified_folds(d, n_folds, seed):
    """Assign records to ``n_folds`` folds, stratified by class.

    Each class is shuffled and dealt round-robin. The dealing position carries
    over between classes so total fold sizes stay balanced too.
    """
    n_folds = check_positive_int(n_folds, "n_folds")
    seed = check_seed(seed)
    labels = getattr(d, "labels", d)
    labels = np.asarray(labels).astype(str)
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < n_folds]
    if small.size:
        raise DatasetError(
            f"classes {list(small)} have fewer than n_folds={n_folds} members"
        )
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    start = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        folds[idx] = (start + np.arange(idx.size)) % n_folds
        start = (start + idx.size) % n_folds
    return SplitPlan(fold_assignments=folds, n_folds=n_folds, seed=seed)


def make_blobs(n_records=400, n_attrs=4, separation=6.0, seed=0):
    """Two Gaussian classes of equal size whose means differ by ``separation``
    within-class standard deviations along every attribute."""
    n_records = check_positive_int(n_records, "n_records", minimum=4)
    n_attrs = check_positive_int(n_attrs, "n_attrs")
    rng = np.random.default_rng(check_seed(seed))
    half = n_records // 2
    labels = np.array(["a"] * half + ["b"] * (n_records - half))
    offsets = np.where(labels == "a", -separation / 2, separation / 2)
    X = rng.standard_normal((n_records, n_attrs)) + offsets[:, None]
    return Dataset(
        features=X,
        labels=labels,
        attr_names=tuple(f"x{j}" for j in range(n_attrs)),
        label_name="class",
        name="blobs",
    )


WHOLESALE_FILE = "wholesale_customers_synthetic.csv"


def wholesale_path():
    """Path of the bundled 440-record, wholesale-customers-shaped CSV."""
    return Path(str(resources.files("privselect") / "data" / WHOLESALE_FILE))


def load_wholesale():
    return load_csv(wholesale_path(), label_column="Channel", name="wholesale")
