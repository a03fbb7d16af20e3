"""OCNN toolkit configuration: training knobs and the flat TOML run file."""
from __future__ import annotations
import dataclasses
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from shared.data import SCALE_MINMAX, VALID_SCALES
from shared.errors import ConfigError
from shared.numerics import LEAKY_RELU, SIGMOID, Activation

METHOD_OCNN = "ocnn"
METHOD_FROZEN = "frozen-ocsvm"
METHOD_KDE = "kde"
METHOD_IFOREST = "iforest"
METHOD_AE_RECON = "ae-recon"
VALID_METHODS = (METHOD_OCNN, METHOD_FROZEN, METHOD_KDE, METHOD_IFOREST, METHOD_AE_RECON)
# what -decision ranks by, per method
ORIENTATIONS = {
    METHOD_OCNN: "-S",
    METHOD_FROZEN: "-S",
    METHOD_KDE: "-log_density",
    METHOD_IFOREST: "s(x)",
    METHOD_AE_RECON: "reconstruction_error",
}

DEFAULT_KDE_BANDWIDTHS = tuple(2.0 ** (k / 2) for k in range(1, 11))  # 2^0.5 .. 2^5


def _positive(errors: list[str], name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        errors.append(f"{name} must be > 0, got {value!r}")


def _at_least(errors: list[str], name: str, value: int, low: int) -> None:
    if not (isinstance(value, int) and value >= low):
        errors.append(f"{name} must be an integer >= {low}, got {value!r}")


@dataclass
class TrainConfig:
    """Alternating-minimisation knobs for OC-NN (w, V, encoder) training."""
    learning_rate: float = 0.1
    hidden_lr_scale: float = 1.0  # V / extra layer step = learning_rate * this
    encoder_lr_scale: float = 0.1  # encoder step = hidden step * this
    inner_epochs: int = 10
    max_outer_iters: int = 50
    tol: float = 1e-4
    batch_size: int = 256
    full_batch: bool = False
    seed: int = 0
    train_hidden: bool = True
    train_encoder: bool = True
    regularize_encoder: bool = True

    def validate(self) -> list[str]:
        errors: list[str] = []
        _positive(errors, "learning_rate", self.learning_rate)
        if isinstance(self.learning_rate, (int, float)) and self.learning_rate > 1:
            errors.append(f"learning_rate must be <= 1, got {self.learning_rate}")
        _positive(errors, "hidden_lr_scale", self.hidden_lr_scale)
        _positive(errors, "encoder_lr_scale", self.encoder_lr_scale)
        _at_least(errors, "inner_epochs", self.inner_epochs, 1)
        _at_least(errors, "max_outer_iters", self.max_outer_iters, 1)
        _positive(errors, "tol", self.tol)
        _at_least(errors, "batch_size", self.batch_size, 1)
        if not isinstance(self.seed, int):
            errors.append(f"seed must be an integer, got {self.seed!r}")
        return errors


@dataclass
class OcnnArch:
    """Shape of the scoring network: [encoder] -> [extra layer] -> V -> g -> w."""
    hidden_dim: int = 32
    activation: Activation = SIGMOID
    nu: float = 0.1
    init_gain: float = 1.0
    extra_hidden: int = 0  # 0 = no extra bias-free layer before V

    def validate(self) -> list[str]:
        errors: list[str] = []
        _at_least(errors, "hidden_dim", self.hidden_dim, 1)
        errors.extend(self.activation.validate())
        if not (isinstance(self.nu, (int, float)) and 0.0 < self.nu < 1.0):
            errors.append(f"nu must lie in (0, 1), got {self.nu!r}")
        _positive(errors, "init_gain", self.init_gain)
        _at_least(errors, "extra_hidden", self.extra_hidden, 0)
        return errors


def default_arch(input_dim: int, nu: float = 0.1) -> OcnnArch:
    """Feed-forward sizes keyed by input width: 512-d inputs get 128 hidden units, others 32."""
    return OcnnArch(hidden_dim=128 if input_dim >= 512 else 32, nu=nu)


@dataclass
class AeConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    hidden_activation: Activation = LEAKY_RELU

    def validate(self) -> list[str]:
        errors: list[str] = []
        _positive(errors, "learning_rate", self.learning_rate)
        if isinstance(self.learning_rate, (int, float)) and self.learning_rate > 1:
            errors.append(f"learning_rate must be <= 1, got {self.learning_rate}")
        if not (0.0 <= self.momentum < 1.0):
            errors.append(f"momentum must lie in [0, 1), got {self.momentum}")
        _at_least(errors, "epochs", self.epochs, 1)
        _at_least(errors, "batch_size", self.batch_size, 1)
        errors.extend(self.hidden_activation.validate())
        return errors


@dataclass
class KdeConfig:
    bandwidths: tuple[float, ...] = DEFAULT_KDE_BANDWIDTHS
    folds: int = 5
    seed: int = 0

    def validate(self) -> list[str]:
        errors: list[str] = []
        if not self.bandwidths:
            errors.append("bandwidth grid must be non-empty")
        for h in self.bandwidths:
            _positive(errors, "bandwidth", h)
        _at_least(errors, "folds", self.folds, 2)
        return errors


@dataclass
class IForestConfig:
    n_trees: int = 100
    subsample: int = 256
    seed: int = 0

    def validate(self) -> list[str]:
        errors: list[str] = []
        _at_least(errors, "n_trees", self.n_trees, 1)
        _at_least(errors, "subsample", self.subsample, 2)
        return errors


@dataclass
class RunConfig:
    """Flat key/value parameters shared by the CLI and run files.

    Keys mirror the long CLI flags with dashes turned into underscores.
    None means "derive from the data" (hidden size, architecture).
    """
    method: str = METHOD_OCNN
    nu: float = 0.1
    hidden: Optional[int] = None
    activation: str = "sigmoid"
    gain: float = 1.0
    extra_layer: int = 0
    ae_arch: list[int] = field(default_factory=list)  # encoder widths after the input, e.g. [32, 16]
    epochs: int = 50  # autoencoder epochs
    inner_epochs: int = 10
    max_iters: int = 50
    tol: float = 1e-4
    lr: float = 0.1
    hidden_lr_scale: float = 1.0
    encoder_lr_scale: float = 0.1
    batch: int = 256
    full_batch: bool = False
    seed: int = 0
    seeds: list[int] = field(default_factory=list)
    workers: int = 1
    scale: str = SCALE_MINMAX
    label_col: Optional[str] = None
    train_encoder: bool = True
    regularize_encoder: bool = True
    trees: int = 100
    subsample: int = 256
    folds: int = 5
    bins: int = 20

    def validate(self) -> list[str]:
        errors: list[str] = []
        if self.method not in VALID_METHODS:
            errors.append(f"method must be one of {', '.join(VALID_METHODS)}, got {self.method!r}")
        if self.scale not in VALID_SCALES:
            errors.append(f"scale must be one of {', '.join(sorted(VALID_SCALES))}, got {self.scale!r}")
        if self.hidden is not None:
            _at_least(errors, "hidden", self.hidden, 1)
        try:
            Activation.parse(self.activation)
        except ConfigError as e:
            errors.extend(e.errors)
        for width in self.ae_arch:
            _at_least(errors, "ae_arch width", width, 1)
        _at_least(errors, "epochs", self.epochs, 1)
        _at_least(errors, "workers", self.workers, 1)
        _at_least(errors, "bins", self.bins, 1)
        errors.extend(self.train_config().validate())
        errors.extend(self.arch(max(self.hidden or 1, 1)).validate())
        errors.extend(self.kde_config().validate())
        errors.extend(self.iforest_config().validate())
        return errors

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            hidden_lr_scale=self.hidden_lr_scale,
            encoder_lr_scale=self.encoder_lr_scale,
            inner_epochs=self.inner_epochs,
            max_outer_iters=self.max_iters,
            tol=self.tol,
            batch_size=self.batch,
            full_batch=self.full_batch,
            seed=self.seed,
            train_hidden=self.method != METHOD_FROZEN,
            train_encoder=self.train_encoder,
            regularize_encoder=self.regularize_encoder,
        )

    def arch(self, input_dim: int) -> OcnnArch:
        preset = default_arch(input_dim, self.nu)
        act = Activation.parse(self.activation) if self.activation else preset.activation
        return OcnnArch(
            hidden_dim=self.hidden if self.hidden is not None else preset.hidden_dim,
            activation=act,
            nu=self.nu,
            init_gain=self.gain,
            extra_hidden=self.extra_layer,
        )

    def ae_config(self) -> AeConfig:
        return AeConfig(epochs=self.epochs, seed=self.seed)

    def kde_config(self) -> KdeConfig:
        return KdeConfig(folds=self.folds, seed=self.seed)

    def iforest_config(self) -> IForestConfig:
        return IForestConfig(n_trees=self.trees, subsample=self.subsample, seed=self.seed)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_run_config(path: Path) -> dict[str, Any]:
    """Read a flat TOML run file; unknown keys and nested tables are errors."""
    with open(path, "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    errors = []
    for key, value in raw.items():
        if key not in _RUN_FIELDS:
            errors.append(f"{path}: unknown key {key!r}")
        elif isinstance(value, dict):
            errors.append(f"{path}: key {key!r} must be a plain value, not a table")
    if errors:
        raise ConfigError(errors)
    return raw


def build_run_config(file_values: dict[str, Any], overrides: dict[str, Any],
                     base: Optional[RunConfig] = None) -> RunConfig:
    """Base defaults, then file values, then every override that is not None; validated."""
    merged = base.as_dict() if base is not None else {}
    merged.update(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = [k for k in merged if k not in _RUN_FIELDS]
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])
    # TOML gives ints for whole-number floats and floats where ints are expected; coerce
    for key in ("nu", "gain", "tol", "lr", "hidden_lr_scale", "encoder_lr_scale"):
        if isinstance(merged.get(key), int) and not isinstance(merged.get(key), bool):
            merged[key] = float(merged[key])
    cfg = RunConfig(**merged)
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    return cfg
