"""Dataset parsing: sparse label/index:value text files and bare returns CSV.

Both readers are strict — malformed input fails with the offending line or
row number rather than being silently skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class LabeledDataset:
    """Sparse labeled rows: each row is ({1-based index: value}, label±1)."""

    rows: tuple
    dim: int

    def __len__(self):
        return len(self.rows)

    def to_dense(self, feature_scale: float = 1.0):
        """Dense (features, labels) arrays; values multiplied by
        feature_scale (use 1/255 for raw pixel data)."""
        A = np.zeros((len(self.rows), self.dim))
        b = np.zeros(len(self.rows))
        for i, (feats, label) in enumerate(self.rows):
            for idx, val in feats.items():
                A[i, idx - 1] = val * feature_scale
            b[i] = label
        return A, b


@dataclass(frozen=True)
class ReturnsTable:
    """Rectangular table of per-period returns, one row per period."""

    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]


def read_libsvm(path, label_filter=None) -> LabeledDataset:
    """Parse "label idx:val idx:val ..." lines (1-based ascending indices).

    Labels are parsed numerically and mapped > 0 → +1, <= 0 → −1. For
    multi-class sources pass label_filter=(pos, neg): only rows whose raw
    label equals one of the two are kept, mapped to +1/−1 respectively.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    dim = 0
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip("\r").strip()
        if not line:
            continue
        parts = line.split()
        try:
            raw_label = float(parts[0])
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad label {parts[0]!r}") from exc
        if label_filter is not None:
            pos, neg = label_filter
            if raw_label == pos:
                label = 1.0
            elif raw_label == neg:
                label = -1.0
            else:
                continue
        else:
            label = 1.0 if raw_label > 0 else -1.0
        feats = {}
        prev_idx = 0
        for item in parts[1:]:
            try:
                idx_str, val_str = item.split(":", 1)
                idx = int(idx_str)
                val = float(val_str)
            except ValueError as exc:
                raise DataError(f"line {lineno}: bad feature {item!r}") from exc
            if idx < 1:
                raise DataError(f"line {lineno}: index {idx} must be >= 1")
            if idx <= prev_idx:
                raise DataError(f"line {lineno}: indices must be ascending")
            prev_idx = idx
            feats[idx] = val
            dim = max(dim, idx)
        rows.append((feats, label))
    return LabeledDataset(rows=tuple(rows), dim=dim)


def read_returns_csv(path, skip_header: bool = False) -> ReturnsTable:
    """Comma-separated reals, one period per line; ragged rows are an error."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip("\r") for ln in text.split("\n")]
    lines = [ln for ln in lines if ln.strip() != ""]
    if skip_header and lines:
        lines = lines[1:]
    rows = []
    width = None
    for rowno, line in enumerate(lines, start=1):
        try:
            vals = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise DataError(f"row {rowno}: non-numeric entry") from exc
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataError(
                f"row {rowno}: expected {width} columns, got {len(vals)}")
        rows.append(vals)
    values = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, 0))
    if values.size and not np.all(np.isfinite(values)):
        raise DataError("returns table contains non-finite values")
    return ReturnsTable(values=values)


def subsample(dataset, count: int, seed: int):
    """Uniform without-replacement subset, deterministic in the seed.

    count equal to the dataset size returns a permuted copy of the whole set.
    """
    size = len(dataset)
    if count < 0 or count > size:
        raise DataError(f"subsample count {count} outside [0, {size}]")
    keep = np.random.default_rng(seed).permutation(size)[:count]
    if isinstance(dataset, LabeledDataset):
        return LabeledDataset(rows=tuple(dataset.rows[i] for i in keep),
                              dim=dataset.dim)
    if isinstance(dataset, ReturnsTable):
        return ReturnsTable(values=dataset.values[keep])
    raise DataError(f"cannot subsample {type(dataset).__name__}")
