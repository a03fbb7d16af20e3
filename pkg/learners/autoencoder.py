"""Dense autoencoder trained on normal data; its encoder feeds OC-NN and its residual is a baseline score."""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from learners.layers import (
    DenseLayer, LayerGrad, backward_stack, check_chain, flatten_grads, forward_stack,
    init_layer, stack_output,
)
from shared.config import AeConfig
from shared.data import Dataset
from shared.errors import ConfigError, DivergenceError, ShapeError
from shared.numerics import LINEAR, make_rng

logger = logging.getLogger("ocnn.learners.autoencoder")


@dataclass
class AutoencoderModel:
    encoder_layers: list[DenseLayer] = field(default_factory=list)
    decoder_layers: list[DenseLayer] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.encoder_layers[0].in_dim

    @property
    def code_dim(self) -> int:
        return self.encoder_layers[-1].out_dim

    @property
    def layers(self) -> list[DenseLayer]:
        return self.encoder_layers + self.decoder_layers

    def validate(self) -> list[str]:
        errors = []
        if not self.encoder_layers or not self.decoder_layers:
            return ["autoencoder needs at least one encoder and one decoder layer"]
        try:
            out = check_chain(self.layers, self.input_dim)
        except (ShapeError, ConfigError) as e:
            return [str(e)]
        if out != self.input_dim:
            errors.append(f"decoder output dim {out} != input dim {self.input_dim}")
        return errors

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel([l.copy() for l in self.encoder_layers], [l.copy() for l in self.decoder_layers])


def validate_arch(arch: Sequence[int]) -> list[str]:
    errors = []
    if len(arch) < 2:
        errors.append(f"autoencoder arch needs the input width and at least one code width, got {list(arch)}")
    for width in arch:
        if not (isinstance(width, (int, np.integer)) and width >= 1):
            errors.append(f"autoencoder widths must be integers >= 1, got {width!r}")
    return errors


def build_autoencoder(arch: Sequence[int], cfg: AeConfig) -> AutoencoderModel:
    """arch = [input, h1, ..., code]; the decoder mirrors it and ends in a linear layer."""
    errors = validate_arch(arch) + cfg.validate()
    if errors:
        raise ConfigError(errors)
    widths = [int(w) for w in arch]
    encoder = [
        init_layer(widths[i], widths[i + 1], cfg.hidden_activation, cfg.seed, f"ae.encoder.{i}")
        for i in range(len(widths) - 1)
    ]
    back = widths[::-1]
    decoder = []
    for i in range(len(back) - 1):
        act = LINEAR if i == len(back) - 2 else cfg.hidden_activation
        decoder.append(init_layer(back[i], back[i + 1], act, cfg.seed, f"ae.decoder.{i}"))
    return AutoencoderModel(encoder, decoder)


def ae_loss_and_grads(model: AutoencoderModel, X: np.ndarray) -> tuple[float, list[LayerGrad]]:
    """Mean squared error over the batch and the features, with its gradient."""
    out, caches = forward_stack(model.layers, X)
    resid = out - X
    loss = float(np.mean(resid * resid))
    d_out = 2.0 * resid / resid.size
    grads, _ = backward_stack(model.layers, caches, d_out)
    return loss, grads


def ae_loss(model: AutoencoderModel, X: np.ndarray) -> float:
    out = stack_output(model.layers, X)
    resid = out - X
    return float(np.mean(resid * resid))


def ae_gradient(model: AutoencoderModel, X: np.ndarray) -> np.ndarray:
    """Flattened analytic gradient, ordered like learners.layers.flatten_params(model.layers)."""
    _, grads = ae_loss_and_grads(model, X)
    return flatten_grads(grads)


def ae_train(data: Dataset, arch: Sequence[int], cfg: AeConfig) -> tuple[AutoencoderModel, list[float]]:
    """Mini-batch SGD with momentum on reconstruction MSE; returns the model and per-epoch mean loss."""
    if data.n == 0:
        raise ConfigError("ae_train needs a non-empty dataset")
    if len(arch) >= 1 and arch[0] != data.d:
        raise ShapeError("ae_train arch", (data.n, data.d), tuple(arch))
    model = build_autoencoder(arch, cfg)
    layers = model.layers
    velocity = [LayerGrad(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers]
    rng = make_rng(cfg.seed, "ae.batches")
    X = data.X
    losses: list[float] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(data.n)
        total = 0.0
        for start in range(0, data.n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch_loss, grads = ae_loss_and_grads(model, X[idx])
            total += batch_loss * idx.size
            for layer, g, v in zip(layers, grads, velocity):
                v.weight *= cfg.momentum
                v.weight -= cfg.learning_rate * g.weight
                layer.weight += v.weight
                v.bias *= cfg.momentum
                v.bias -= cfg.learning_rate * g.bias
                layer.bias += v.bias
        epoch_loss = total / data.n
        if not math.isfinite(epoch_loss):
            logger.error("Autoencoder diverged at epoch %d", epoch + 1)
            raise DivergenceError("autoencoder loss is not finite", epoch=epoch + 1, history=losses)
        losses.append(epoch_loss)
        logger.debug("ae epoch %d loss %.6g", epoch + 1, epoch_loss)

    logger.info("Autoencoder %s trained: %d epochs, loss %.6g -> %.6g",
                "-".join(str(a) for a in arch), cfg.epochs, losses[0], losses[-1])
    return model, losses


def _require_input(model: AutoencoderModel, data: Dataset, what: str) -> None:
    if data.n == 0:
        return
    if data.d != model.input_dim:
        raise ShapeError(what, (data.n, data.d), ("N", model.input_dim))


def encode(model: AutoencoderModel, data: Dataset) -> np.ndarray:
    _require_input(model, data, "encode")
    if data.n == 0:
        return np.empty((0, model.code_dim))
    return stack_output(model.encoder_layers, data.X)


def reconstruct(model: AutoencoderModel, data: Dataset) -> np.ndarray:
    _require_input(model, data, "reconstruct")
    if data.n == 0:
        return np.empty((0, model.input_dim))
    return stack_output(model.layers, data.X)


def reconstruction_errors(model: AutoencoderModel, data: Dataset) -> np.ndarray:
    """Per-row squared L2 residual."""
    if data.n == 0:
        return np.empty(0)
    resid = reconstruct(model, data) - data.X
    return np.sum(resid * resid, axis=1)
