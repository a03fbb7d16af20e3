"""Save and load fitted models (and the input transform they were trained behind) as TOML documents."""
from __future__ import annotations
from pathlib import Path
from typing import Any, Optional

import numpy as np

from learners.autoencoder import AutoencoderModel
from learners.baselines import AeReconModel, IsolationForestModel, IsolationTree, KdeModel
from learners.layers import DenseLayer
from learners.ocnn import OcnnModel
from learners.scoring import FittedModel, method_of
from shared.data import SCALE_NONE, MinMaxRecord, Preprocessing
from shared.errors import ConfigError, ShapeError
from shared.formats import (
    KIND_AE_RECON, KIND_AUTOENCODER, KIND_IFOREST, KIND_KDE, KIND_OCNN, MODEL_KINDS,
    TomlDocument, read_document,
)
from shared.numerics import Activation


def _layer_values(layer: DenseLayer) -> dict[str, Any]:
    return {"activation": str(layer.activation), "weight": layer.weight, "bias": layer.bias}


def _layer_from(raw: dict[str, Any]) -> DenseLayer:
    weight = np.array(raw["weight"], dtype=np.float64)
    if weight.ndim != 2:
        raise ShapeError("stored layer weight", weight.shape, ("out", "in"))
    bias = np.array(raw["bias"], dtype=np.float64) if "bias" in raw else None
    return DenseLayer(weight, bias, Activation.parse(raw["activation"]))


def _add_layers(doc: TomlDocument, name: str, layers: list[DenseLayer]) -> None:
    for layer in layers:
        doc.table(name, _layer_values(layer), array=True)


def _add_transform(doc: TomlDocument, transform: Optional[Preprocessing]) -> None:
    if transform is None or transform.mode == SCALE_NONE:
        return
    doc.table("transform", {
        "mode": transform.mode,
        "lam": transform.lam,
        "mins": transform.record.mins if transform.record is not None else None,
        "maxs": transform.record.maxs if transform.record is not None else None,
    })


def _transform_from(data: dict[str, Any]) -> Preprocessing:
    raw = data.get("transform")
    if raw is None:
        return Preprocessing(SCALE_NONE)
    record = None
    if "mins" in raw:
        record = MinMaxRecord(np.array(raw["mins"], dtype=np.float64), np.array(raw["maxs"], dtype=np.float64))
    return Preprocessing(raw["mode"], record, float(raw.get("lam", 1e-8)))


# ---- Writers ----

def _ocnn_document(model: OcnnModel) -> TomlDocument:
    doc = TomlDocument(KIND_OCNN)
    doc.table("model", {
        "method": method_of(model),
        "nu": model.nu,
        "r": model.r,
        "activation": str(model.activation),
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "train_hidden": model.train_hidden,
        "train_encoder": model.train_encoder,
        "regularize_encoder": model.regularize_encoder,
        "w": model.w,
        "V": model.V,
    })
    _add_layers(doc, "encoder", model.encoder)
    if model.extra is not None:
        doc.table("extra", _layer_values(model.extra))
    return doc


def _kde_document(model: KdeModel) -> TomlDocument:
    doc = TomlDocument(KIND_KDE)
    doc.table("model", {
        "bandwidth": model.bandwidth,
        "nu": model.nu,
        "r": model.r,
        "grid": list(model.grid),
        "cv_log_likelihood": list(model.cv_log_likelihood),
        "points": model.points,
    })
    return doc


def _iforest_document(model: IsolationForestModel) -> TomlDocument:
    doc = TomlDocument(KIND_IFOREST)
    doc.table("model", {
        "n_trees": model.n_trees,
        "subsample": model.subsample,
        "input_dim": model.input_dim,
        "nu": model.nu,
        "r": model.r,
    })
    for tree in model.trees:
        doc.table("trees", {
            "split_dim": tree.split_dim,
            "split_value": tree.split_value,
            "left": tree.left,
            "right": tree.right,
            "size": tree.size,
        }, array=True)
    return doc


def _autoencoder_tables(doc: TomlDocument, model: AutoencoderModel) -> None:
    _add_layers(doc, "encoder", model.encoder_layers)
    _add_layers(doc, "decoder", model.decoder_layers)


def _ae_recon_document(model: AeReconModel) -> TomlDocument:
    doc = TomlDocument(KIND_AE_RECON)
    doc.table("model", {"nu": model.nu, "r": model.r, "losses": list(model.losses)})
    _autoencoder_tables(doc, model.autoencoder)
    return doc


def save_model(model: FittedModel, path: Path, transform: Optional[Preprocessing] = None) -> None:
    if isinstance(model, OcnnModel):
        doc = _ocnn_document(model)
    elif isinstance(model, KdeModel):
        doc = _kde_document(model)
    elif isinstance(model, IsolationForestModel):
        doc = _iforest_document(model)
    elif isinstance(model, AeReconModel):
        doc = _ae_recon_document(model)
    else:
        raise ConfigError(f"cannot save {type(model).__name__}")
    _add_transform(doc, transform)
    doc.save(path)


def save_autoencoder(model: AutoencoderModel, path: Path, losses: Optional[list[float]] = None) -> None:
    doc = TomlDocument(KIND_AUTOENCODER)
    doc.table("model", {"input_dim": model.input_dim, "code_dim": model.code_dim,
                        "losses": list(losses) if losses is not None else None})
    _autoencoder_tables(doc, model)
    doc.save(path)


# ---- Readers ----

def _ocnn_from(data: dict[str, Any]) -> OcnnModel:
    m = data["model"]
    extra = _layer_from(data["extra"]) if "extra" in data else None
    model = OcnnModel(
        V=np.array(m["V"], dtype=np.float64),
        w=np.array(m["w"], dtype=np.float64),
        r=float(m["r"]),
        nu=float(m["nu"]),
        activation=Activation.parse(m["activation"]),
        encoder=[_layer_from(l) for l in data.get("encoder", [])],
        extra=extra,
        train_hidden=bool(m["train_hidden"]),
        train_encoder=bool(m.get("train_encoder", True)),
        regularize_encoder=bool(m.get("regularize_encoder", True)),
    )
    errors = model.validate()
    if errors:
        raise ConfigError(errors)
    return model


def _kde_from(data: dict[str, Any]) -> KdeModel:
    m = data["model"]
    return KdeModel(
        points=np.array(m["points"], dtype=np.float64),
        bandwidth=float(m["bandwidth"]),
        r=float(m["r"]),
        nu=float(m["nu"]),
        cv_log_likelihood=tuple(float(v) for v in m.get("cv_log_likelihood", [])),
        grid=tuple(float(v) for v in m.get("grid", [])),
    )


def _iforest_from(data: dict[str, Any]) -> IsolationForestModel:
    m = data["model"]
    trees = tuple(
        IsolationTree(
            np.array(t["split_dim"], dtype=np.int64),
            np.array(t["split_value"], dtype=np.float64),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["size"], dtype=np.int64),
        )
        for t in data.get("trees", [])
    )
    if len(trees) != m["n_trees"]:
        raise ConfigError(f"iforest document lists {len(trees)} trees, header says {m['n_trees']}")
    return IsolationForestModel(trees, int(m["n_trees"]), int(m["subsample"]), int(m["input_dim"]),
                                float(m["r"]), float(m["nu"]))


def _autoencoder_from(data: dict[str, Any]) -> AutoencoderModel:
    model = AutoencoderModel(
        [_layer_from(l) for l in data.get("encoder", [])],
        [_layer_from(l) for l in data.get("decoder", [])],
    )
    errors = model.validate()
    if errors:
        raise ConfigError(errors)
    return model


def load_model(path: Path) -> tuple[FittedModel, Preprocessing]:
    data = read_document(path, MODEL_KINDS)
    kind = data["document"]["kind"]
    if kind == KIND_OCNN:
        model: FittedModel = _ocnn_from(data)
    elif kind == KIND_KDE:
        model = _kde_from(data)
    elif kind == KIND_IFOREST:
        model = _iforest_from(data)
    else:
        m = data["model"]
        model = AeReconModel(_autoencoder_from(data), float(m["r"]), float(m["nu"]),
                             tuple(float(v) for v in m.get("losses", [])))
    return model, _transform_from(data)


def load_autoencoder(path: Path) -> AutoencoderModel:
    return _autoencoder_from(read_document(path, {KIND_AUTOENCODER}))
