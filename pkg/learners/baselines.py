"""Shallow comparison methods: frozen-projection OC-SVM, Gaussian KDE, isolation forest, AE residual.

Each fitted baseline keeps the nu-quantile r of its training normality scores,
so it produces the same ScoreSet (decision = raw - r) as OC-NN.
"""
from __future__ import annotations
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import digamma, logsumexp

from learners.autoencoder import AutoencoderModel, ae_train, reconstruction_errors
from learners.ocnn import HistoryRow, OcnnModel, ScoreSet, train
from shared.config import (
    METHOD_AE_RECON, METHOD_IFOREST, METHOD_KDE, ORIENTATIONS, AeConfig, IForestConfig, KdeConfig, OcnnArch, TrainConfig,
)
from shared.data import Dataset
from shared.errors import ConfigError, ShapeError
from shared.numerics import SIGMOID, Activation, make_rng
from shared.quantile import nu_quantile

logger = logging.getLogger("ocnn.learners.baselines")

EULER_GAMMA = 0.5772156649015329


def _check_nu(nu: float) -> None:
    if not (0.0 < nu < 1.0):
        raise ConfigError(f"nu must lie in (0, 1), got {nu}")


# ---- Frozen-projection OC-SVM ----

def frozen_ocsvm_train(data: Dataset, hidden_dim: int, nu: float, cfg: TrainConfig,
                       activation: Activation = SIGMOID,
                       init_gain: float = 20.0) -> tuple[OcnnModel, list[HistoryRow]]:
    """OC-NN with V drawn once and never updated: a linear one-class machine on g(V x)."""
    arch = OcnnArch(hidden_dim=hidden_dim, activation=activation, nu=nu, init_gain=init_gain)
    frozen = dataclasses.replace(cfg, train_hidden=False)
    return train(data, arch, frozen)


# ---- Gaussian KDE ----

@dataclass(frozen=True)
class KdeModel:
    points: np.ndarray
    bandwidth: float
    r: float = 0.0
    nu: float = 0.1
    cv_log_likelihood: tuple[float, ...] = ()  # per grid entry, in grid order
    grid: tuple[float, ...] = ()

    @property
    def input_dim(self) -> int:
        return int(self.points.shape[1])


def _sq_dists(Q: np.ndarray, P: np.ndarray, chunk_elems: int = 4_000_000) -> np.ndarray:
    """Squared distances by explicit differences, chunked over query rows."""
    out = np.empty((Q.shape[0], P.shape[0]))
    step = max(1, chunk_elems // max(1, P.shape[0] * P.shape[1]))
    for s in range(0, Q.shape[0], step):
        diff = Q[s:s + step, None, :] - P[None, :, :]
        out[s:s + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _log_density(Q: np.ndarray, P: np.ndarray, h: float) -> np.ndarray:
    d = P.shape[1]
    log_norm = -0.5 * d * math.log(2.0 * math.pi * h * h) - math.log(P.shape[0])
    return logsumexp(-_sq_dists(Q, P) / (2.0 * h * h), axis=1) + log_norm


def kde_fit(data: Dataset, bandwidth_grid: Sequence[float] | None = None, folds: int = 5,
            seed: int = 0, nu: float = 0.1) -> KdeModel:
    """Pick h by k-fold held-out log-likelihood (contiguous folds after a seeded shuffle)."""
    cfg = KdeConfig(tuple(bandwidth_grid) if bandwidth_grid is not None else KdeConfig().bandwidths, folds, seed)
    errors = cfg.validate()
    if data.n < cfg.folds:
        errors.append(f"kde_fit needs N >= folds, got N={data.n}, folds={cfg.folds}")
    if errors:
        raise ConfigError(errors)
    _check_nu(nu)

    order = make_rng(seed, "kde.folds").permutation(data.n)
    parts = np.array_split(order, cfg.folds)
    scores = []
    for h in cfg.bandwidths:
        fold_means = []
        for k in range(cfg.folds):
            held = parts[k]
            kept = np.concatenate([parts[j] for j in range(cfg.folds) if j != k])
            fold_means.append(float(np.mean(_log_density(data.X[held], data.X[kept], h))))
        scores.append(float(np.mean(fold_means)))
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    h = float(cfg.bandwidths[best])
    points = data.X.copy()
    r = nu_quantile(_log_density(points, points, h), nu).r
    logger.info("KDE bandwidth %.4g selected (held-out log-likelihood %.6g)", h, scores[best])
    return KdeModel(points, h, r, nu, tuple(scores), tuple(float(b) for b in cfg.bandwidths))


def kde_score(model: KdeModel, query: np.ndarray) -> float:
    """Log-density of one query vector."""
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != model.input_dim:
        raise ShapeError("kde_score", (q.size,), (model.input_dim,))
    return float(_log_density(q.reshape(1, -1), model.points, model.bandwidth)[0])


def kde_score_samples(model: KdeModel, data: Dataset) -> np.ndarray:
    if data.n == 0:
        return np.empty(0)
    if data.d != model.input_dim:
        raise ShapeError("kde_score_samples", (data.n, data.d), ("N", model.input_dim))
    return _log_density(data.X, model.points, model.bandwidth)


def kde_decide(model: KdeModel, data: Dataset) -> ScoreSet:
    raw = kde_score_samples(model, data)
    return ScoreSet(raw, raw - model.r, model.r, data.labels, METHOD_KDE, ORIENTATIONS[METHOD_KDE])


# ---- Isolation forest ----

def c_factor(n: int) -> float:
    """Average unsuccessful-search path length in a BST of n points: 2H(n-1) - 2(n-1)/n."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    harmonic = float(digamma(n)) + EULER_GAMMA  # H(n-1)
    return 2.0 * harmonic - 2.0 * (n - 1) / n


@dataclass(frozen=True)
class IsolationTree:
    """Flat node arrays; split_dim == -1 marks a leaf holding `size` training points."""
    split_dim: np.ndarray
    split_value: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    @property
    def depth(self) -> int:
        depths = {0: 0}
        deepest = 0
        for node in range(self.split_dim.size):
            if self.split_dim[node] >= 0:
                for child in (self.left[node], self.right[node]):
                    depths[int(child)] = depths[node] + 1
                    deepest = max(deepest, depths[int(child)])
        return deepest

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        depth = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        active = self.split_dim[node] >= 0
        while np.any(active):
            idx = rows[active]
            n = node[idx]
            go_left = X[idx, self.split_dim[n]] < self.split_value[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            depth[idx] += 1.0
            active = self.split_dim[node] >= 0
        leaf_adjust = np.array([c_factor(int(s)) for s in self.size])
        return depth + leaf_adjust[node]


@dataclass(frozen=True)
class IsolationForestModel:
    trees: tuple[IsolationTree, ...]
    n_trees: int
    subsample: int  # effective psi = min(requested psi, N)
    input_dim: int
    r: float = 0.0
    nu: float = 0.1


def _grow(X: np.ndarray, limit: int, rng: np.random.Generator) -> IsolationTree:
    split_dim: list[int] = []
    split_value: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []

    def new_node(count: int) -> int:
        split_dim.append(-1)
        split_value.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(count)
        return len(size) - 1

    stack = [(new_node(X.shape[0]), X, 0)]
    while stack:
        node, pts, depth = stack.pop()
        if depth >= limit or pts.shape[0] <= 1:
            continue
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        if not np.any(hi > lo):  # duplicates
            continue
        # a dimension constant on this node sends every point right
        dim = int(rng.integers(pts.shape[1]))
        value = float(lo[dim] + (hi[dim] - lo[dim]) * rng.random())
        mask = pts[:, dim] < value
        split_dim[node] = dim
        split_value[node] = value
        left[node] = new_node(int(mask.sum()))
        right[node] = new_node(int((~mask).sum()))
        # right pushed first so the left subtree is grown (and numbered) first
        stack.append((right[node], pts[~mask], depth + 1))
        stack.append((left[node], pts[mask], depth + 1))
    return IsolationTree(
        np.array(split_dim, dtype=np.int64), np.array(split_value), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(size, dtype=np.int64),
    )


def iforest_fit(data: Dataset, t: int = 100, psi: int = 256, seed: int = 0, nu: float = 0.1) -> IsolationForestModel:
    errors = IForestConfig(t, psi, seed).validate()
    if data.n < 2:
        errors.append(f"iforest_fit needs N >= 2, got {data.n}")
    if errors:
        raise ConfigError(errors)
    _check_nu(nu)
    rng = make_rng(seed, "iforest")
    sub = min(psi, data.n)
    limit = math.ceil(math.log2(sub))
    trees = []
    for _ in range(t):
        idx = rng.choice(data.n, size=sub, replace=False)
        trees.append(_grow(data.X[idx], limit, rng))
    model = IsolationForestModel(tuple(trees), t, sub, data.d)
    raw = -_anomaly_scores(model, data.X)
    model = dataclasses.replace(model, r=nu_quantile(raw, nu).r, nu=nu)
    logger.info("Isolation forest: %d trees, subsample %d, depth limit %d", t, sub, limit)
    return model


def _anomaly_scores(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    mean_path = np.mean([tree.path_lengths(X) for tree in model.trees], axis=0)
    return np.power(2.0, -mean_path / c_factor(model.subsample))


def iforest_score(model: IsolationForestModel, query: np.ndarray) -> float:
    """s(x) in (0, 1]; higher = more anomalous."""
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != model.input_dim:
        raise ShapeError("iforest_score", (q.size,), (model.input_dim,))
    return float(_anomaly_scores(model, q.reshape(1, -1))[0])


def iforest_score_samples(model: IsolationForestModel, data: Dataset) -> np.ndarray:
    if data.n == 0:
        return np.empty(0)
    if data.d != model.input_dim:
        raise ShapeError("iforest_score_samples", (data.n, data.d), ("N", model.input_dim))
    return _anomaly_scores(model, data.X)


def iforest_decide(model: IsolationForestModel, data: Dataset) -> ScoreSet:
    raw = -iforest_score_samples(model, data)
    return ScoreSet(raw, raw - model.r, model.r, data.labels, METHOD_IFOREST, ORIENTATIONS[METHOD_IFOREST])


# ---- Autoencoder residual ----

@dataclass(frozen=True)
class AeReconModel:
    autoencoder: AutoencoderModel
    r: float
    nu: float
    losses: tuple[float, ...] = field(default=())


def ae_recon(data: Dataset, arch: Sequence[int], cfg: AeConfig, nu: float = 0.1) -> AeReconModel:
    """Train an autoencoder on normal data; the normality score is minus the reconstruction error."""
    _check_nu(nu)
    model, losses = ae_train(data, arch, cfg)
    r = nu_quantile(-reconstruction_errors(model, data), nu).r
    return AeReconModel(model, r, nu, tuple(losses))


def ae_recon_decide(model: AeReconModel, data: Dataset) -> ScoreSet:
    raw = -reconstruction_errors(model.autoencoder, data)
    return ScoreSet(raw, raw - model.r, model.r, data.labels, METHOD_AE_RECON, ORIENTATIONS[METHOD_AE_RECON])
