"""Method-independent scoring of any fitted model."""
from __future__ import annotations
from typing import Union

from learners.baselines import (
    AeReconModel, IsolationForestModel, KdeModel, ae_recon_decide, iforest_decide, kde_decide,
)
from learners.ocnn import OcnnModel, ScoreSet, decide
from shared.config import METHOD_AE_RECON, METHOD_FROZEN, METHOD_IFOREST, METHOD_KDE, METHOD_OCNN
from shared.data import Dataset
from shared.errors import ConfigError

FittedModel = Union[OcnnModel, KdeModel, IsolationForestModel, AeReconModel]


def method_of(model: FittedModel) -> str:
    if isinstance(model, OcnnModel):
        return METHOD_OCNN if model.train_hidden else METHOD_FROZEN
    if isinstance(model, KdeModel):
        return METHOD_KDE
    if isinstance(model, IsolationForestModel):
        return METHOD_IFOREST
    if isinstance(model, AeReconModel):
        return METHOD_AE_RECON
    raise ConfigError(f"not a fitted model: {type(model).__name__}")


def score_with(model: FittedModel, data: Dataset) -> ScoreSet:
    if isinstance(model, OcnnModel):
        return decide(model, data, method_of(model))
    if isinstance(model, KdeModel):
        return kde_decide(model, data)
    if isinstance(model, IsolationForestModel):
        return iforest_decide(model, data)
    if isinstance(model, AeReconModel):
        return ae_recon_decide(model, data)
    raise ConfigError(f"not a fitted model: {type(model).__name__}")
