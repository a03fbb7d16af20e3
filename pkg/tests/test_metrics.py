"""Tests for AUC and the decision histogram."""
import numpy as np
import pytest

from evaluation.metrics import histogram, roc_auc
from shared.errors import ConfigError, ShapeError


def _pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_perfect_and_reversed():
    labels = [0, 0, 1, 1]
    assert roc_auc([0.1, 0.2, 0.8, 0.9], labels) == 1.0
    assert roc_auc([0.9, 0.8, 0.2, 0.1], labels) == 0.0


def test_auc_ties_count_half():
    assert roc_auc([1.0, 1.0], [0, 1]) == 0.5
    assert roc_auc([0.0, 1.0, 1.0], [0, 0, 1]) == pytest.approx(0.75)


def test_auc_matches_pairwise_count():
    rng = np.random.default_rng(0)
    scores = np.round(rng.normal(size=80), 1)  # rounding forces ties
    labels = (rng.random(80) < 0.3).astype(int)
    assert roc_auc(scores, labels) == pytest.approx(_pairwise_auc(scores, labels))


def test_auc_needs_both_classes_and_valid_labels():
    with pytest.raises(ConfigError):
        roc_auc([0.1, 0.2], [0, 0])
    with pytest.raises(ConfigError):
        roc_auc([0.1, 0.2], [0, 2])
    with pytest.raises(ShapeError):
        roc_auc([0.1, 0.2], [0])


def test_histogram_counts_per_class():
    scores = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    labels = np.array([1, 1, 0, 0, 0])
    hist = histogram(scores, labels, bins=4)
    assert hist.bins == 4
    assert np.allclose(hist.edges, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert list(hist.count_anomalous) == [1, 1, 0, 0]
    # the maximum lands in the last bin
    assert list(hist.count_normal) == [0, 0, 1, 2]
    assert hist.total == 5
    assert hist.rows()[0] == (-1.0, -0.5, 0, 1)


def test_histogram_constant_scores_and_no_labels():
    hist = histogram([2.0, 2.0, 2.0], None, bins=3)
    assert hist.total == 3
    assert int(hist.count_anomalous.sum()) == 0


def test_histogram_rejects_bad_bins():
    with pytest.raises(ConfigError):
        histogram([1.0], None, bins=0)
    with pytest.raises(ConfigError):
        histogram([], None, bins=3)


def test_auc_anti_symmetry_and_monotone_invariance():
    rng = np.random.default_rng(4)
    for _ in range(20):
        scores = np.round(rng.normal(size=60), 1)
        labels = np.r_[np.zeros(50, dtype=int), np.ones(10, dtype=int)]
        auc = roc_auc(scores, labels)
        assert abs(auc + roc_auc(-scores, labels) - 1.0) <= 1e-12
        assert roc_auc(np.exp(scores), labels) == auc
        assert roc_auc(3.0 * scores + 1.0, labels) == auc
