"""Datasets, synthetic benchmarks, delimited I/O and preprocessing transforms."""
from __future__ import annotations
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from shared.errors import ConfigError, DataParseError, ShapeError
from shared.numerics import box_muller, make_rng

logger = logging.getLogger("ocnn.shared.data")

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1

SCALE_NONE = "none"
SCALE_MINMAX = "minmax"
SCALE_L1GCN = "l1gcn"
VALID_SCALES = {SCALE_NONE, SCALE_MINMAX, SCALE_L1GCN}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Instance matrix X (N x D), optional 0/1 labels (1 = anomalous), optional feature names."""
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(0, 0) if X.size == 0 else X.reshape(1, -1)
        object.__setattr__(self, "X", _frozen(X))
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
            object.__setattr__(self, "labels", _frozen(labels))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        errors = self.validate()
        if errors:
            raise ConfigError(errors)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def validate(self) -> list[str]:
        errors = []
        if self.X.ndim != 2:
            errors.append(f"X must be 2-D, got shape {self.X.shape}")
            return errors
        if not np.all(np.isfinite(self.X)):
            errors.append("X contains non-finite values")
        if self.labels is not None:
            if self.labels.size != self.n:
                errors.append(f"labels length {self.labels.size} != N {self.n}")
            elif not np.all(np.isin(self.labels, (LABEL_NORMAL, LABEL_ANOMALOUS))):
                errors.append("labels must be 0 (normal) or 1 (anomalous)")
        if self.feature_names is not None and len(self.feature_names) != self.d:
            errors.append(f"{len(self.feature_names)} feature names for {self.d} columns")
        return errors

    def with_X(self, X: np.ndarray) -> "Dataset":
        """Same labels, new features (names dropped when the width changes)."""
        X = np.asarray(X, dtype=np.float64)
        names = self.feature_names if X.ndim == 2 and X.shape[1] == self.d else None
        return Dataset(X, self.labels, names)

    def require_dim(self, d: int, what: str) -> None:
        if self.d != d:
            raise ShapeError(what, (self.n, self.d), ("N", d))


def pool(*parts: Dataset) -> Dataset:
    """Stack datasets row-wise; labels kept only if every part has them."""
    if not parts:
        raise ConfigError("pool needs at least one dataset")
    d = parts[0].d
    for p in parts[1:]:
        p.require_dim(d, "pool")
    X = np.vstack([p.X for p in parts])
    labels = None
    if all(p.labels is not None for p in parts):
        labels = np.concatenate([p.labels for p in parts])
    return Dataset(X, labels, parts[0].feature_names)


# ---- Synthetic benchmarks ----

def gen_synthetic(
    n_normal: int = 190,
    n_anomalous: int = 10,
    d: int = 512,
    sigma_normal: float = 2.0,
    sigma_anomalous: float = 10.0,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Normal points N(0, sigma_normal^2 I) for training, anomalies N(0, sigma_anomalous^2 I) for testing."""
    errors = []
    if d < 1:
        errors.append(f"d must be >= 1, got {d}")
    if n_normal < 1 or n_anomalous < 1:
        errors.append("n_normal and n_anomalous must be >= 1")
    if not (sigma_normal > 0 and sigma_anomalous > 0):
        errors.append("sigmas must be > 0")
    if errors:
        raise ConfigError(errors)
    train_X = sigma_normal * box_muller(make_rng(seed, "synthetic.train"), (n_normal, d))
    test_X = sigma_anomalous * box_muller(make_rng(seed, "synthetic.test"), (n_anomalous, d))
    train = Dataset(train_X, np.full(n_normal, LABEL_NORMAL))
    test = Dataset(test_X, np.full(n_anomalous, LABEL_ANOMALOUS))
    logger.debug("synthetic seed=%d train=%s test=%s", seed, train_X.shape, test_X.shape)
    return train, test


def gen_blobs(
    n_normal: int = 500,
    n_anomalous: int = 50,
    d: int = 64,
    offset: float = 4.0,
    sigma: float = 1.0,
    center_scale: float = 3.0,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Two Gaussian blobs: normals around a random center, anomalies offset*sigma away from it.

    The shift runs along the negative main diagonal, so every feature of the anomalous
    blob sits offset*sigma/sqrt(d) lower and the centers are offset*sigma apart.
    """
    errors = []
    if d < 1:
        errors.append(f"d must be >= 1, got {d}")
    if n_normal < 1 or n_anomalous < 1:
        errors.append("n_normal and n_anomalous must be >= 1")
    if not (sigma > 0 and offset > 0):
        errors.append("sigma and offset must be > 0")
    if errors:
        raise ConfigError(errors)
    center = center_scale * box_muller(make_rng(seed, "blobs.center"), (d,))
    normal = center + sigma * box_muller(make_rng(seed, "blobs.normal"), (n_normal, d))
    shifted = center - offset * sigma / math.sqrt(d)
    anomalous = shifted + sigma * box_muller(make_rng(seed, "blobs.anomalous"), (n_anomalous, d))
    return (
        Dataset(normal, np.full(n_normal, LABEL_NORMAL)),
        Dataset(anomalous, np.full(n_anomalous, LABEL_ANOMALOUS)),
    )


# ---- Delimited files ----

def load_delimited(path: Path, has_header: bool = True, label_column: Optional[str] = None) -> Dataset:
    """Read a comma-separated numeric table.

    Row numbers in errors are 1-based file lines (the header, if any, is line 1).
    A label column may be named by header text, or by 0-based index when there is no header.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = [r for r in csv.reader(f)]
    if not rows:
        logger.info("Loaded %s: empty file", path)
        return Dataset(np.empty((0, 0)))
    first_line = 1
    header: Optional[list[str]] = None
    if has_header and rows:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
        first_line = 2

    width = len(header) if header is not None else (len(rows[0]) if rows else 0)
    label_idx: Optional[int] = None
    if label_column is not None:
        if header is not None:
            if label_column not in header:
                raise DataParseError(f"unknown label column {label_column!r}", str(path), 1, label_column)
            label_idx = header.index(label_column)
        else:
            try:
                label_idx = int(label_column)
            except ValueError:
                raise DataParseError(f"label column {label_column!r} needs a header row", str(path))
            if not 0 <= label_idx < width:
                raise DataParseError(f"label column index {label_idx} out of range", str(path))

    col_names = header if header is not None else [str(i) for i in range(width)]
    values = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise DataParseError(f"expected {width} cells, found {len(row)}", str(path), line)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataParseError(f"non-numeric cell {cell!r}", str(path), line, col_names[j])
            if not math.isfinite(v):
                raise DataParseError(f"non-finite cell {cell!r}", str(path), line, col_names[j])
            values[i, j] = v

    labels = None
    names: Optional[list[str]] = list(header) if header is not None else None
    if label_idx is not None:
        raw = values[:, label_idx]
        for i, v in enumerate(raw):
            if v not in (0.0, 1.0):
                raise DataParseError(f"label must be 0 or 1, got {v!r}", str(path), first_line + i,
                                     col_names[label_idx])
        labels = raw.astype(np.int64)
        values = np.delete(values, label_idx, axis=1)
        if names is not None:
            del names[label_idx]
    logger.info("Loaded %s: %d rows x %d features", path, values.shape[0], values.shape[1])
    return Dataset(values, labels, tuple(names) if names is not None else None)


def save_delimited(data: Dataset, path: Path, label_column: str = "label") -> None:
    """Write features (repr precision) plus the label column when present."""
    names = list(data.feature_names) if data.feature_names is not None else [f"f{j}" for j in range(data.d)]
    lines = [",".join(names + ([label_column] if data.labels is not None else []))]
    for i in range(data.n):
        cells = [repr(float(v)) for v in data.X[i]]
        if data.labels is not None:
            cells.append(str(int(data.labels[i])))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---- Preprocessing ----

@dataclass(frozen=True)
class MinMaxRecord:
    """Per-feature (min, max) fitted on training data; constant features map to 0."""
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        data.require_dim(self.mins.size, "minmax transform")
        span = self.maxs - self.mins
        constant = span == 0
        safe = np.where(constant, 1.0, span)
        X = (data.X - self.mins) / safe
        X[:, constant] = 0.0
        return data.with_X(X)


def minmax_scale(data: Dataset) -> tuple[Dataset, MinMaxRecord]:
    if data.n == 0:
        raise ConfigError("minmax_scale needs a non-empty dataset")
    record = MinMaxRecord(data.X.min(axis=0).copy(), data.X.max(axis=0).copy())
    return record.apply(data), record


def l1_gcn(data: Dataset, lam: float = 1e-8) -> Dataset:
    """Per-instance centring divided by (lam + mean absolute deviation)."""
    if lam < 0:
        raise ConfigError(f"l1_gcn lambda must be >= 0, got {lam}")
    centered = data.X - data.X.mean(axis=1, keepdims=True)
    scale = lam + np.abs(centered).mean(axis=1, keepdims=True)
    X = np.divide(centered, scale, out=np.zeros_like(centered), where=scale > 0)
    return data.with_X(X)


@dataclass(frozen=True)
class Preprocessing:
    """A fitted scale mode: none, minmax, or l1gcn (per-row GCN followed by min-max)."""
    mode: str = SCALE_NONE
    record: Optional[MinMaxRecord] = None
    lam: float = 1e-8

    def apply(self, data: Dataset) -> Dataset:
        if self.mode == SCALE_NONE:
            return data
        if self.mode == SCALE_L1GCN:
            data = l1_gcn(data, self.lam)
        if self.record is None:
            raise ConfigError(f"scale mode {self.mode!r} has no fitted record")
        return self.record.apply(data)


def fit_preprocessing(mode: str, data: Dataset, lam: float = 1e-8) -> tuple[Dataset, Preprocessing]:
    if mode not in VALID_SCALES:
        raise ConfigError(f"Unknown scale mode {mode!r}")
    if mode == SCALE_NONE:
        return data, Preprocessing(SCALE_NONE)
    if mode == SCALE_L1GCN:
        data = l1_gcn(data, lam)
    scaled, record = minmax_scale(data)
    return scaled, Preprocessing(mode, record, lam)
