"""Ranking metric and decision-score histogram."""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from shared.data import LABEL_ANOMALOUS, LABEL_NORMAL
from shared.errors import ConfigError, ShapeError
from shared.numerics import ensure_finite


def _labels_for(scores: np.ndarray, labels) -> np.ndarray:
    lab = np.asarray(labels).ravel()
    if lab.size != scores.size:
        raise ShapeError("labels vs scores", lab.shape, scores.shape)
    if not np.all(np.isin(lab, (LABEL_NORMAL, LABEL_ANOMALOUS))):
        raise ConfigError("labels must be 0 (normal) or 1 (anomalous)")
    return lab.astype(np.int64)


def roc_auc(scores, labels) -> float:
    """P(anomalous score > normal score), ties counted 1/2 (Mann-Whitney U / (n1 n0)).

    `scores` are anomaly scores: higher = more anomalous.
    """
    s = ensure_finite(np.asarray(scores, dtype=np.float64).ravel(), "roc_auc scores")
    lab = _labels_for(s, labels)
    n_pos = int(np.sum(lab == LABEL_ANOMALOUS))
    n_neg = lab.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError("roc_auc needs both normal and anomalous labels")
    ranks = rankdata(s)  # average ranks for ties
    u = float(np.sum(ranks[lab == LABEL_ANOMALOUS])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray  # bins + 1 equal-width edges over [min, max]
    count_normal: np.ndarray
    count_anomalous: np.ndarray

    @property
    def bins(self) -> int:
        return int(self.count_normal.size)

    @property
    def total(self) -> int:
        return int(self.count_normal.sum() + self.count_anomalous.sum())

    def rows(self) -> list[tuple[float, float, int, int]]:
        return [
            (float(self.edges[i]), float(self.edges[i + 1]), int(self.count_normal[i]), int(self.count_anomalous[i]))
            for i in range(self.bins)
        ]


def histogram(scores, labels: Optional[np.ndarray], bins: int) -> Histogram:
    """Per-class counts in equal-width bins; a value equal to max lands in the last bin.

    Without labels every score counts as normal.
    """
    if not (isinstance(bins, (int, np.integer)) and bins >= 1):
        raise ConfigError(f"bins must be an integer >= 1, got {bins!r}")
    s = ensure_finite(np.asarray(scores, dtype=np.float64).ravel(), "histogram scores")
    if s.size == 0:
        raise ConfigError("histogram needs at least one score")
    lab = np.zeros(s.size, dtype=np.int64) if labels is None else _labels_for(s, labels)
    edges = np.linspace(float(s.min()), float(s.max()), bins + 1)
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, bins - 1)
    normal = np.bincount(idx[lab == LABEL_NORMAL], minlength=bins)
    anomalous = np.bincount(idx[lab == LABEL_ANOMALOUS], minlength=bins)
    return Histogram(edges, normal, anomalous)
