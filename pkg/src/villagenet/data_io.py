"""Dataset loading, synthetic benchmarks and feature scaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np


class DataError(ValueError):
    """Raised when an input dataset is malformed."""


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[Sequence[str]] = field(default=None)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"dataset must have N >= 1 and d >= 1, got {values.shape}")
        if not np.isfinite(values).all():
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"labels length {labels.shape} does not match N={values.shape[0]}"
                )
            if labels.size and labels.min() < 0:
                raise DataError("labels must be non-negative integers")
            object.__setattr__(self, "labels", labels)
        if self.feature_names is not None and len(self.feature_names) != values.shape[1]:
            raise DataError("feature_names length does not match d")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


def _dense_labels(raw: Sequence[str]) -> np.ndarray:
    """Integer labels are kept as-is; anything else is re-indexed by first appearance."""
    try:
        ints = [int(s) for s in raw]
        if min(ints, default=0) >= 0:
            return np.asarray(ints, dtype=np.int64)
    except ValueError:
        pass
    try:
        floats = [float(s) for s in raw]
        if all(f.is_integer() and f >= 0 for f in floats):
            return np.asarray(floats, dtype=np.int64)
    except ValueError:
        pass
    index: dict[str, int] = {}
    return np.asarray([index.setdefault(s, len(index)) for s in raw], dtype=np.int64)


def load_csv(
    path: Union[str, Path],
    label_column: Optional[Union[str, int]] = None,
    has_header: bool = False,
    delimiter: str = ",",
) -> DataMatrix:
    """Read a numeric CSV file into a :class:`DataMatrix`.

    ``label_column`` may be a header name (requires ``has_header``) or a
    0-based column index. Rows and columns in error messages are 1-based
    data positions, not counting the header line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    header = None
    if has_header and rows:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0])
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: ragged row {r} has {len(row)} fields, expected {width}")

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataError(f"{path}: label column {label_column!r} not found")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if label_idx < 0:
                label_idx += width
            if not 0 <= label_idx < width:
                raise DataError(f"{path}: label column index {label_column} out of range")

    feature_cols = [c for c in range(width) if c != label_idx]
    if not feature_cols:
        raise DataError(f"{path}: no feature columns")
    values = np.empty((len(rows), len(feature_cols)))
    for r, row in enumerate(rows):
        for j, c in enumerate(feature_cols):
            try:
                values[r, j] = float(row[c])
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {row[c]!r} at row {r + 1}, column {c + 1}"
                ) from None
            if not np.isfinite(values[r, j]):
                raise DataError(f"{path}: non-finite value at row {r + 1}, column {c + 1}")

    labels = None
    if label_idx is not None:
        labels = _dense_labels([row[label_idx].strip() for row in rows])
    names = [header[c] for c in feature_cols] if header is not None else None
    return DataMatrix(values, labels, names)


def save_csv(data: DataMatrix, path: Union[str, Path], header: bool = False) -> None:
    """Write ``data`` as CSV; the label, if any, becomes the last column."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            names = list(data.feature_names or [f"x{j}" for j in range(data.n_cols)])
            w.writerow(names + (["label"] if data.labels is not None else []))
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.values[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            w.writerow(row)


def make_two_moons(n: int, noise: float = 0.0, seed: int = 0) -> DataMatrix:
    """Two interleaving half circles in the plane, labelled 0 (upper) and 1 (lower)."""
    if n < 2:
        raise DataError(f"two-moons needs n >= 2, got {n}")
    if noise < 0:
        raise DataError(f"noise must be non-negative, got {noise}")
    n_upper = n // 2
    n_lower = n - n_upper
    t_up = np.linspace(0.0, np.pi, n_upper)
    t_lo = np.linspace(0.0, np.pi, n_lower)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)])
    values = np.vstack([upper, lower])
    if noise > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(scale=noise, size=values.shape)
    labels = np.repeat([0, 1], [n_upper, n_lower])
    return DataMatrix(values, labels, ["x", "y"])


def standardize(data: DataMatrix) -> DataMatrix:
    """Zero-mean, unit-variance columns; constant columns become zeros."""
    if data.n_rows < 2:
        raise DataError("standardize needs at least two rows")
    x = data.values
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    centered = x - mean
    scale = np.where(std > 0, std, 1.0)
    out = centered / scale
    out[:, std == 0] = 0.0
    return replace(data, values=out)
