"""Tabular dataset loading, validation, and per-feature [0,1] normalization.

A single perturbation radius ``epsilon`` is only meaningful when every
feature lives on the same scale, so all data is min-max scaled into the
unit box before anything else sees it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BALL_TOL = 1e-12


class DataError(ValueError):
    """Raised when an input file or array violates the dataset contract."""


@dataclass(frozen=True)
class RawTable:
    """Parsed tabular content before normalization.

    ``labels`` are dense class indices; ``class_labels[i]`` is the original
    label text for class ``i``.
    """

    features: np.ndarray
    labels: np.ndarray
    class_labels: tuple[str, ...]
    feature_names: tuple[str, ...] | None
    name: str


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature (min, max) recorded from raw data, for round-tripping."""

    minimums: np.ndarray
    maximums: np.ndarray

    def __post_init__(self):
        if np.any(self.minimums > self.maximums):
            raise DataError("feature minimum exceeds maximum")
        _lock(self.minimums)
        _lock(self.maximums)

    @property
    def constant(self) -> np.ndarray:
        """Mask of degenerate (min == max) columns; these map to 0.5."""
        return self.minimums == self.maximums

    def transform(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        span = self.maximums - self.minimums
        safe = np.where(self.constant, 1.0, span)
        out = (raw - self.minimums) / safe
        out = np.where(self.constant, 0.5, out)
        return np.clip(out, 0.0, 1.0)

    def inverse(self, normalized: np.ndarray) -> np.ndarray:
        normalized = np.asarray(normalized, dtype=np.float64)
        span = self.maximums - self.minimums
        out = self.minimums + normalized * span
        return np.where(self.constant, self.minimums, out)


@dataclass(frozen=True)
class Dataset:
    """Normalized instance matrix with class labels and an epsilon radius.

    Immutable after construction; safe to share across concurrent
    evaluators.
    """

    instances: np.ndarray
    labels: np.ndarray
    feature_count: int
    class_count: int
    epsilon: float
    name: str
    class_labels: tuple[str, ...]
    splittable: np.ndarray

    def __post_init__(self):
        n = len(self.instances)
        if n < 1 or len(self.labels) != n:
            raise DataError("instances and labels must have equal length >= 1")
        if self.instances.shape != (n, self.feature_count):
            raise DataError("instance matrix shape mismatch")
        if self.class_count < 2:
            raise DataError("need at least two classes")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise DataError("label out of range")
        if self.epsilon < 0:
            raise DataError("epsilon must be non-negative")
        lo, hi = self.instances.min(initial=0.0), self.instances.max(initial=1.0)
        if lo < -BALL_TOL or hi > 1.0 + BALL_TOL:
            raise DataError("instances must lie in [0,1] after normalization")
        _lock(self.instances)
        _lock(self.labels)
        _lock(self.splittable)

    def __len__(self) -> int:
        return len(self.instances)

    def feasible_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate perturbation interval: the epsilon ball clipped to [0,1]."""
        low = np.clip(self.instances - self.epsilon, 0.0, 1.0)
        high = np.clip(self.instances + self.epsilon, 0.0, 1.0)
        return low, high


def _lock(arr: np.ndarray) -> None:
    try:
        arr.setflags(write=False)
    except ValueError:
        pass


def _parse_label(text: str) -> str:
    """Canonical label key: integral numerics collapse ('4', '4.0' -> '4')."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        return text
    if not np.isfinite(value) or value != int(value):
        raise DataError(f"label {text!r} is numeric but not integral")
    return str(int(value))


def load_csv(path, label_column: int = -1, header: bool = False, name: str | None = None) -> RawTable:
    """Parse a numeric CSV into a RawTable.

    String or integer labels are mapped to dense class indices in
    first-appearance order. Errors carry 1-based file row numbers.
    """
    path = Path(path)
    if name is None:
        name = path.stem
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows = [(i + 1, row) for i, row in enumerate(rows) if row]
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        _, head = rows[0]
        rows = rows[1:]
        feature_names = tuple(c.strip() for i, c in enumerate(head) if i != label_column % len(head))
    else:
        feature_names = None
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0][1])
    if not -width <= label_column < width:
        raise DataError(f"label column {label_column} out of range for {width} columns")
    label_index = label_column % width

    features = np.empty((len(rows), width - 1), dtype=np.float64)
    class_labels: list[str] = []
    class_index: dict[str, int] = {}
    labels = np.empty(len(rows), dtype=np.int64)

    for out_row, (line_no, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: ragged row {line_no} (expected {width} cells, got {len(row)})")
        out_col = 0
        for col, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"{path}: missing cell at row {line_no}, column {col + 1}")
            if col == label_index:
                key = _parse_label(cell)
                if key not in class_index:
                    class_index[key] = len(class_labels)
                    class_labels.append(key)
                labels[out_row] = class_index[key]
            else:
                try:
                    features[out_row, out_col] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric feature {cell!r} at row {line_no}, column {col + 1}"
                    ) from None
                out_col += 1
    if not np.all(np.isfinite(features)):
        raise DataError(f"{path}: non-finite feature value")

    return RawTable(features, labels, tuple(class_labels), feature_names, name)


def raw_table_from_arrays(X, y, name: str = "array", label_order: str = "sorted") -> RawTable:
    """RawTable from in-memory arrays; labels become dense class indices.

    ``label_order`` is "sorted" (scikit-learn convention) or
    "first-appearance" (the CSV convention).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("X must be 2-D and aligned with y")
    if label_order == "sorted":
        classes, labels = np.unique(y, return_inverse=True)
    elif label_order == "first-appearance":
        seen: dict = {}
        labels = np.empty(len(y), dtype=np.int64)
        for i, value in enumerate(y):
            key = value.item() if hasattr(value, "item") else value
            if key not in seen:
                seen[key] = len(seen)
            labels[i] = seen[key]
        classes = np.array(list(seen))
    else:
        raise DataError(f"unknown label_order {label_order!r}")
    return RawTable(X, labels.astype(np.int64), tuple(str(c) for c in classes), None, name)


def normalize(table: RawTable, epsilon: float) -> tuple[Dataset, FeatureScaling]:
    """Min-max scale every feature into [0,1] and attach the epsilon radius.

    Constant columns map to 0.5 and are flagged non-splittable.
    """
    if len(table.features) == 0:
        raise DataError("cannot normalize an empty table")
    mins = table.features.min(axis=0)
    maxs = table.features.max(axis=0)
    scaling = FeatureScaling(mins, maxs)
    instances = scaling.transform(table.features)
    dataset = Dataset(
        instances=instances,
        labels=np.asarray(table.labels, dtype=np.int64),
        feature_count=instances.shape[1],
        class_count=len(table.class_labels),
        epsilon=float(epsilon),
        name=table.name,
        class_labels=table.class_labels,
        splittable=~scaling.constant,
    )
    return dataset, scaling


def split_dataset(dataset: Dataset, holdout_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random split into (train, holdout); class metadata is shared."""
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError("holdout_fraction must be in (0, 1)")
    n = len(dataset)
    n_holdout = max(1, int(round(n * holdout_fraction)))
    if n_holdout >= n:
        raise DataError("holdout fraction leaves no training data")
    order = np.random.default_rng(seed).permutation(n)
    parts = []
    for tag, idx in (("train", order[n_holdout:]), ("holdout", order[:n_holdout])):
        idx = np.sort(idx)
        parts.append(
            Dataset(
                instances=dataset.instances[idx].copy(),
                labels=dataset.labels[idx].copy(),
                feature_count=dataset.feature_count,
                class_count=dataset.class_count,
                epsilon=dataset.epsilon,
                name=f"{dataset.name}:{tag}",
                class_labels=dataset.class_labels,
                splittable=dataset.splittable.copy(),
            )
        )
    return parts[0], parts[1]
