"""One-class neural network: quantile-hinge objective solved by alternating minimisation.

Scoring path: x -> [encoder] -> [extra bias-free layer] -> V -> g -> <w, .> = y_hat.
The objective is

    1/2 ||w||^2 + 1/2 ||V||_F^2 (+ trained pre-layers) + 1/(nu N) sum_n max(0, r - y_hat_n) - r

Training alternates inner_epochs of subgradient descent on (w, V, ...) with r held
fixed, and the closed-form r update (the nu-quantile of the training scores).
"""
from __future__ import annotations
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from learners.layers import (
    DenseLayer, LayerCache, LayerGrad, backward_stack, check_chain, forward_stack,
    init_layer, weight_norm_sq,
)
from shared.config import METHOD_OCNN, ORIENTATIONS, OcnnArch, TrainConfig
from shared.data import Dataset
from shared.errors import ConfigError, DivergenceError, NumericalError, ShapeError
from shared.formats import HISTORY_HEADER, write_table
from shared.numerics import LEAKY_RELU, Activation, ensure_finite, glorot_init, make_rng
from shared.quantile import QuantileSolution, nu_quantile

logger = logging.getLogger("ocnn.learners.ocnn")

# Slack for the r-step monotonicity check; both sides are fsum-exact up to this.
MONOTONE_SLACK = 1e-12


@dataclass
class OcnnModel:
    V: np.ndarray  # (hidden_dim, feature_dim)
    w: np.ndarray  # (hidden_dim,)
    r: float
    nu: float
    activation: Activation
    encoder: list[DenseLayer] = field(default_factory=list)
    extra: Optional[DenseLayer] = None
    train_hidden: bool = True
    train_encoder: bool = True
    regularize_encoder: bool = True

    @property
    def hidden_dim(self) -> int:
        return int(self.V.shape[0])

    @property
    def pre_layers(self) -> list[DenseLayer]:
        return self.encoder + ([self.extra] if self.extra is not None else [])

    @property
    def input_dim(self) -> int:
        pre = self.pre_layers
        return pre[0].in_dim if pre else int(self.V.shape[1])

    def validate(self) -> list[str]:
        errors = []
        if not (0.0 < self.nu < 1.0):
            errors.append(f"nu must lie in (0, 1), got {self.nu}")
        if self.V.ndim != 2 or self.w.shape != (self.V.shape[0],):
            errors.append(f"w shape {self.w.shape} does not match V shape {self.V.shape}")
        if not math.isfinite(self.r):
            errors.append(f"r must be finite, got {self.r}")
        errors.extend(self.activation.validate())
        if self.extra is not None and self.extra.bias is not None:
            errors.append("the extra layer before V must be bias-free")
        try:
            width = check_chain(self.pre_layers, self.input_dim)
            if self.V.ndim == 2 and width != self.V.shape[1]:
                errors.append(f"feature width {width} != V input width {self.V.shape[1]}")
        except (ShapeError, ConfigError) as e:
            errors.append(str(e))
        return errors

    def copy(self) -> "OcnnModel":
        return dataclasses.replace(
            self,
            V=self.V.copy(),
            w=self.w.copy(),
            encoder=[l.copy() for l in self.encoder],
            extra=None if self.extra is None else self.extra.copy(),
        )


@dataclass(frozen=True)
class ScoreSet:
    """Raw normality scores, decisions raw - r, optional true labels.

    Every method reports a normality score here (higher = more normal), so
    decision < 0 always means "anomalous" and -decision is the anomaly score.
    `orientation` names the quantity the anomaly ranking corresponds to.
    """
    raw: np.ndarray
    decision: np.ndarray
    r: float
    labels: Optional[np.ndarray] = None
    method: str = METHOD_OCNN
    orientation: str = ORIENTATIONS[METHOD_OCNN]

    @property
    def predicted(self) -> np.ndarray:
        return (self.decision < 0).astype(np.int64)

    @property
    def anomaly_scores(self) -> np.ndarray:
        return -self.decision


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    objective: float
    r: float
    fraction_below: float
    objective_before_r: float


# ---- Forward pass ----

@dataclass
class _Forward:
    pre_caches: list[LayerCache]
    features: np.ndarray
    z: np.ndarray
    h: np.ndarray
    y: np.ndarray


def _forward(model: OcnnModel, X: np.ndarray) -> _Forward:
    features, caches = forward_stack(model.pre_layers, X)
    z = features @ model.V.T
    h = model.activation(z)
    return _Forward(caches, features, z, h, h @ model.w)


def _check_input(model: OcnnModel, data: Dataset, what: str) -> None:
    if data.n and data.d != model.input_dim:
        raise ShapeError(what, (data.n, data.d), ("N", model.input_dim))


def forward_scores(model: OcnnModel, data: Dataset) -> np.ndarray:
    _check_input(model, data, "forward_scores")
    if data.n == 0:
        return np.empty(0)
    return ensure_finite(_forward(model, data.X).y, "forward_scores")


# ---- Objective and gradients ----

def _regularized_pre(model: OcnnModel) -> list[DenseLayer]:
    """Pre-V layers that carry the Frobenius penalty."""
    layers = []
    if model.encoder and model.train_encoder and model.regularize_encoder:
        layers.extend(model.encoder)
    if model.extra is not None and model.train_hidden:
        layers.append(model.extra)
    return layers


def regularizer(model: OcnnModel) -> float:
    """1/2 of the squared norms of every trained weight (a frozen V is a constant and left out)."""
    total = float(model.w @ model.w)
    if model.train_hidden:
        total += float(np.sum(model.V * model.V))
    total += weight_norm_sq(_regularized_pre(model))
    return 0.5 * total


def _hinge_mean(scores: np.ndarray, r: float, nu: float) -> float:
    return math.fsum(float(v) for v in np.maximum(0.0, r - scores)) / (nu * scores.size)


def ocnn_objective(model: OcnnModel, data: Dataset, r: float, scores: Optional[np.ndarray] = None) -> float:
    """Full objective at bias r; pass `scores` to skip the forward pass."""
    if data.n == 0:
        raise ConfigError("ocnn_objective needs a non-empty dataset")
    y = forward_scores(model, data) if scores is None else scores
    return regularizer(model) + _hinge_mean(y, r, model.nu) - r


def wv_loss(model: OcnnModel, data: Dataset, r: float) -> float:
    """The (w, V) subproblem: the objective without the -r term."""
    if data.n == 0:
        raise ConfigError("wv_loss needs a non-empty dataset")
    return regularizer(model) + _hinge_mean(forward_scores(model, data), r, model.nu)


@dataclass
class WvGrad:
    w: np.ndarray
    V: Optional[np.ndarray]
    pre: list[LayerGrad]


def _batch_grad(model: OcnnModel, X: np.ndarray, r: float, n_total: int) -> tuple[float, WvGrad]:
    """Subgradient of frac * regularizer + 1/(nu N) sum_batch hinge, frac = |batch| / N.

    Summed over one epoch of disjoint batches this is the gradient of wv_loss.
    The hinge subgradient at r == y_hat is 0.
    """
    fw = _forward(model, X)
    frac = X.shape[0] / n_total
    margin = r - fw.y
    active = margin > 0
    loss = frac * regularizer(model) + float(np.sum(margin[active])) / (model.nu * n_total)
    coef = np.where(active, -1.0 / (model.nu * n_total), 0.0)

    gw = frac * model.w + fw.h.T @ coef
    gV = None
    pre_grads: list[LayerGrad] = []
    needs_hidden = model.train_hidden
    needs_pre = (model.extra is not None and model.train_hidden) or (model.encoder and model.train_encoder)
    if needs_hidden or needs_pre:
        dz = np.outer(coef, model.w) * model.activation.derivative(fw.z, fw.h)
        if needs_hidden:
            gV = frac * model.V + dz.T @ fw.features
        if needs_pre and model.pre_layers:
            pre_grads, _ = backward_stack(model.pre_layers, fw.pre_caches, dz @ model.V)
            regularized = {id(l) for l in _regularized_pre(model)}
            for layer, g in zip(model.pre_layers, pre_grads):
                if id(layer) in regularized:
                    g.weight += frac * layer.weight
    return loss, WvGrad(gw, gV, pre_grads)


def _trainable_pre(model: OcnnModel) -> list[bool]:
    flags = [model.train_encoder] * len(model.encoder)
    if model.extra is not None:
        flags.append(model.train_hidden)
    return flags


def wv_gradient(model: OcnnModel, data: Dataset, r: float) -> np.ndarray:
    """Full-batch subgradient of wv_loss, flattened in param_vector order."""
    _check_input(model, data, "wv_gradient")
    _, g = _batch_grad(model, data.X, r, data.n)
    return _flatten(model, g)


def param_vector(model: OcnnModel) -> np.ndarray:
    """Trainable parameters: w, then V (if trained), then trained pre-layer weights and biases."""
    parts = [model.w.ravel()]
    if model.train_hidden:
        parts.append(model.V.ravel())
    for layer, trained in zip(model.pre_layers, _trainable_pre(model)):
        if trained:
            parts.append(layer.weight.ravel())
            if layer.bias is not None:
                parts.append(layer.bias.ravel())
    return np.concatenate(parts)


def with_params(model: OcnnModel, theta: np.ndarray) -> OcnnModel:
    """Copy of model with the trainable parameters replaced from theta (param_vector layout)."""
    theta = np.asarray(theta, dtype=np.float64)
    expected = param_vector(model).size
    if theta.ndim != 1 or theta.size != expected:
        raise ShapeError("with_params", theta.shape, (expected,))
    out = model.copy()
    pos = 0

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal pos
        n = int(np.prod(shape))
        chunk = theta[pos:pos + n].reshape(shape).copy()
        pos += n
        return chunk

    out.w = take(model.w.shape)
    if model.train_hidden:
        out.V = take(model.V.shape)
    for layer, trained in zip(out.pre_layers, _trainable_pre(model)):
        if trained:
            layer.weight = take(layer.weight.shape)
            if layer.bias is not None:
                layer.bias = take(layer.bias.shape)
    return out


def _flatten(model: OcnnModel, g: WvGrad) -> np.ndarray:
    parts = [g.w.ravel()]
    if model.train_hidden and g.V is not None:
        parts.append(g.V.ravel())
    trained = _trainable_pre(model)
    for layer, flag, lg in zip(model.pre_layers, trained, g.pre or [None] * len(trained)):
        if flag and lg is not None:
            parts.append(lg.weight.ravel())
            if lg.bias is not None:
                parts.append(lg.bias.ravel())
    return np.concatenate(parts)


# ---- Alternating steps ----

def _batches(n: int, cfg: TrainConfig, rng: np.random.Generator) -> list[np.ndarray]:
    if cfg.full_batch or cfg.batch_size >= n:
        return [np.arange(n)]
    order = rng.permutation(n)
    return [order[s:s + cfg.batch_size] for s in range(0, n, cfg.batch_size)]


def wv_step(model: OcnnModel, data: Dataset, r: float, cfg: TrainConfig,
            rng: Optional[np.random.Generator] = None, epoch_offset: int = 0) -> OcnnModel:
    """cfg.inner_epochs of subgradient descent on the (w, V) subproblem with r fixed."""
    if not math.isfinite(r):
        raise ConfigError(f"wv_step needs a finite r, got {r}")
    _check_input(model, data, "wv_step")
    if data.n == 0:
        raise ConfigError("wv_step needs a non-empty dataset")
    rng = rng if rng is not None else make_rng(cfg.seed, "ocnn.batches")
    out = model.copy()
    lr = cfg.learning_rate
    lr_hidden = cfg.learning_rate * cfg.hidden_lr_scale
    lr_encoder = lr_hidden * cfg.encoder_lr_scale
    trained_pre = _trainable_pre(out)
    pre_lrs = [lr_encoder] * len(out.encoder) + [lr_hidden] * (out.extra is not None)
    for epoch in range(cfg.inner_epochs):
        total = 0.0
        for idx in _batches(data.n, cfg, rng):
            loss, g = _batch_grad(out, data.X[idx], r, data.n)
            total += loss
            out.w -= lr * g.w
            if g.V is not None:
                out.V -= lr_hidden * g.V
            for layer, flag, step, lg in zip(out.pre_layers, trained_pre, pre_lrs, g.pre):
                if flag:
                    layer.weight -= step * lg.weight
                    if layer.bias is not None:
                        layer.bias -= step * lg.bias
        if not math.isfinite(total) or not np.all(np.isfinite(out.w)) or not np.all(np.isfinite(out.V)):
            raise DivergenceError("wv_step loss is not finite", epoch=epoch_offset + epoch + 1)
    return out


def r_step(scores: np.ndarray, nu: float) -> QuantileSolution:
    return nu_quantile(scores, nu)


# ---- Training ----

def init_model(input_dim: int, arch: OcnnArch, cfg: TrainConfig,
               encoder: Optional[list[DenseLayer]] = None) -> OcnnModel:
    errors = arch.validate() + cfg.validate()
    if errors:
        raise ConfigError(errors)
    encoder = [l.copy() for l in (encoder or [])]
    width = check_chain(encoder, input_dim) if encoder else input_dim
    extra = None
    if arch.extra_hidden:
        extra = init_layer(width, arch.extra_hidden, LEAKY_RELU, cfg.seed, "ocnn.extra", with_bias=False)
        width = arch.extra_hidden
    V = glorot_init(arch.hidden_dim, width, cfg.seed, gain=arch.init_gain, stream="ocnn.V")
    w = glorot_init(1, arch.hidden_dim, cfg.seed, stream="ocnn.w").ravel()
    return OcnnModel(
        V=V, w=w, r=0.0, nu=arch.nu, activation=arch.activation, encoder=encoder, extra=extra,
        train_hidden=cfg.train_hidden, train_encoder=cfg.train_encoder,
        regularize_encoder=cfg.regularize_encoder,
    )


def train(data: Dataset, arch: OcnnArch, cfg: TrainConfig,
          encoder: Optional[list[DenseLayer]] = None) -> tuple[OcnnModel, list[HistoryRow]]:
    """Alternate wv_step and r_step until the objective settles or max_outer_iters runs out.

    `encoder` layers (from a trained autoencoder) are copied in front of V.
    Every r update is checked to not raise the objective.
    """
    if data.n < 2:
        raise ConfigError(f"train needs N >= 2, got {data.n}")
    model = init_model(data.d, arch, cfg, encoder)
    rng = make_rng(cfg.seed, "ocnn.batches")
    history: list[HistoryRow] = []

    scores = forward_scores(model, data)
    r = r_step(scores, model.nu).r
    prev = ocnn_objective(model, data, r, scores)

    for it in range(1, cfg.max_outer_iters + 1):
        try:
            model = wv_step(model, data, r, cfg, rng, epoch_offset=(it - 1) * cfg.inner_epochs)
            scores = forward_scores(model, data)
        except (DivergenceError, NumericalError) as e:
            logger.error("OC-NN diverged in outer iteration %d: %s", it, e)
            raise DivergenceError(f"OC-NN training diverged: {e}",
                                  epoch=getattr(e, "epoch", None), history=history) from e
        before = ocnn_objective(model, data, r, scores)
        sol = r_step(scores, model.nu)
        after = ocnn_objective(model, data, sol.r, scores)
        if not (math.isfinite(before) and math.isfinite(after)):
            logger.error("OC-NN objective not finite in outer iteration %d", it)
            raise DivergenceError("OC-NN objective is not finite", epoch=it * cfg.inner_epochs, history=history)
        if after > before + MONOTONE_SLACK * max(1.0, abs(before)):
            logger.error("r update raised the objective in outer iteration %d", it)
            raise NumericalError(f"r update raised the objective: {before!r} -> {after!r}", history=history)
        r = sol.r
        history.append(HistoryRow(it, after, r, sol.fraction_below, before))
        logger.debug("outer %d objective %.6g r %.6g below %.4f", it, after, r, sol.fraction_below)
        if abs(after - prev) <= cfg.tol * max(1.0, abs(prev)):
            break
        prev = after

    model.r = float(r)
    last = history[-1]
    logger.info("OC-NN trained: %d outer iterations, objective %.6g, r %.6g, fraction below r %.4f",
                last.iteration, last.objective, last.r, last.fraction_below)
    return model, history


# ---- Decisions ----

def decide(model: OcnnModel, data: Dataset, method: str = METHOD_OCNN) -> ScoreSet:
    raw = forward_scores(model, data)
    return ScoreSet(raw, raw - model.r, model.r, data.labels, method, ORIENTATIONS[method])


def predict_labels(model: OcnnModel, data: Dataset) -> np.ndarray:
    """1 = anomalous (decision < 0), 0 = normal."""
    return decide(model, data).predicted


def write_history(history: list[HistoryRow], path: Path) -> None:
    write_table(path, HISTORY_HEADER, (
        (h.iteration, h.objective, h.r, h.fraction_below, h.objective_before_r) for h in history
    ))
