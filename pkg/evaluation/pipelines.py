"""End-to-end fit / score / evaluate pipelines shared by the CLI and the seed runner."""
from __future__ import annotations
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

from evaluation.report import EvalReport, build_report
from evaluation.seeds import SeedRunner
from learners.autoencoder import AutoencoderModel, ae_train
from learners.baselines import ae_recon, frozen_ocsvm_train, iforest_fit, kde_fit
from learners.ocnn import HistoryRow, ScoreSet, train
from learners.scoring import FittedModel, score_with
from shared.config import (
    METHOD_AE_RECON, METHOD_FROZEN, METHOD_IFOREST, METHOD_KDE, METHOD_OCNN, RunConfig,
)
from shared.data import Dataset, Preprocessing, fit_preprocessing, gen_blobs, gen_synthetic, pool
from shared.errors import ConfigError
from shared.hashing import config_digest

logger = logging.getLogger("ocnn.evaluation.pipelines")


@dataclass
class FitResult:
    model: FittedModel
    transform: Preprocessing
    history: list[HistoryRow] = field(default_factory=list)
    autoencoder: Optional[AutoencoderModel] = None
    ae_losses: list[float] = field(default_factory=list)


def default_ae_arch(d: int) -> list[int]:
    """Encoder widths after the input: d/2 then d/4."""
    return [max(d // 2, 1), max(d // 4, 1)]


def fit_method(cfg: RunConfig, data: Dataset) -> FitResult:
    """Fit the preprocessing transform, then the configured method, on training data."""
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    scaled, transform = fit_preprocessing(cfg.scale, data)
    arch = cfg.arch(data.d)
    logger.info("Fitting %s on %d x %d (scale=%s, seed=%d)", cfg.method, data.n, data.d, cfg.scale, cfg.seed)

    if cfg.method == METHOD_OCNN:
        if not cfg.ae_arch:
            model, history = train(scaled, arch, cfg.train_config())
            return FitResult(model, transform, history)
        ae, losses = ae_train(scaled, [data.d] + list(cfg.ae_arch), cfg.ae_config())
        model, history = train(scaled, arch, cfg.train_config(), encoder=ae.encoder_layers)
        return FitResult(model, transform, history, ae, losses)
    if cfg.method == METHOD_FROZEN:
        model, history = frozen_ocsvm_train(scaled, arch.hidden_dim, cfg.nu, cfg.train_config(),
                                            arch.activation, arch.init_gain)
        return FitResult(model, transform, history)
    if cfg.method == METHOD_KDE:
        kde = cfg.kde_config()
        return FitResult(kde_fit(scaled, kde.bandwidths, kde.folds, kde.seed, cfg.nu), transform)
    if cfg.method == METHOD_IFOREST:
        forest = cfg.iforest_config()
        return FitResult(iforest_fit(scaled, forest.n_trees, forest.subsample, forest.seed, cfg.nu), transform)
    if cfg.method == METHOD_AE_RECON:
        widths = list(cfg.ae_arch) or default_ae_arch(data.d)
        model = ae_recon(scaled, [data.d] + widths, cfg.ae_config(), cfg.nu)
        return FitResult(model, transform, autoencoder=model.autoencoder, ae_losses=list(model.losses))
    raise ConfigError(f"Unknown method '{cfg.method}'")


def score_dataset(model: FittedModel, transform: Preprocessing, data: Dataset) -> ScoreSet:
    """Apply the stored transform, then score."""
    if data.n == 0:
        return score_with(model, data)
    return score_with(model, transform.apply(data))


def evaluate_split(cfg: RunConfig, train_data: Dataset, test_data: Dataset,
                   seed: Optional[int] = None) -> EvalReport:
    """Fit on the training split, score train and test pooled, report AUC and histogram."""
    fit = fit_method(cfg, train_data)
    scores = score_dataset(fit.model, fit.transform, pool(train_data, test_data))
    return build_report(scores, cfg.bins, seed if seed is not None else cfg.seed, config_digest(cfg.as_dict()))


def synthetic_config(method: str = METHOD_OCNN, nu: float = 0.05, **overrides) -> RunConfig:
    """Settings for the 190 normal / 10 anomalous, d=512 benchmark (full-batch OC-NN).

    V starts at 20x the Glorot bound with a slow hidden step, so the sigmoid units stay
    saturated for normals through the 50 outer iterations; the run ends on the iteration
    cap rather than the tolerance.
    """
    cfg = RunConfig(method=method, nu=nu, full_batch=True, gain=20.0, lr=0.01, hidden_lr_scale=0.1)
    return dataclasses.replace(cfg, **overrides)


def blob_config(train_encoder: bool = True, **overrides) -> RunConfig:
    """Autoencoder 64-32-16 feeding a 32-unit OC-NN, for the two-blob set.

    Encoder weights stay out of the Frobenius penalty: it would shrink the pretrained
    features faster than the hinge can adapt them.
    """
    cfg = RunConfig(
        method=METHOD_OCNN, nu=0.1, hidden=32, ae_arch=[32, 16], epochs=50,
        full_batch=True, train_encoder=train_encoder, regularize_encoder=False,
    )
    return dataclasses.replace(cfg, **overrides)


def synthetic_runner(cfg: RunConfig) -> SeedRunner:
    """Per seed: fresh synthetic data and model, both keyed by that seed."""
    def run(seed: int) -> EvalReport:
        train_data, test_data = gen_synthetic(seed=seed)
        return evaluate_split(dataclasses.replace(cfg, seed=seed), train_data, test_data, seed)
    return run


def blob_runner(cfg: RunConfig) -> SeedRunner:
    def run(seed: int) -> EvalReport:
        train_data, test_data = gen_blobs(seed=seed)
        return evaluate_split(dataclasses.replace(cfg, seed=seed), train_data, test_data, seed)
    return run


def dataset_runner(cfg: RunConfig, train_data: Dataset, test_data: Dataset) -> SeedRunner:
    """Fixed data, model seed varies."""
    def run(seed: int) -> EvalReport:
        return evaluate_split(dataclasses.replace(cfg, seed=seed), train_data, test_data, seed)
    return run
