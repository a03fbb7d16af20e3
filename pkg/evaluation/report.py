"""Evaluation reports: AUC, decision histogram, provenance; TOML and CSV export."""
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from evaluation.metrics import Histogram, histogram, roc_auc
from learners.ocnn import ScoreSet
from shared.data import LABEL_ANOMALOUS, LABEL_NORMAL
from shared.errors import ConfigError
from shared.formats import HISTOGRAM_HEADER, KIND_REPORT, TomlDocument, read_document, write_table


@dataclass(frozen=True)
class SeedAggregate:
    seeds: tuple[int, ...]
    aucs: tuple[float, ...]
    mean_auc: float
    std_auc: float  # population std


@dataclass(frozen=True)
class EvalReport:
    auc: float
    n_normal: int
    n_anomalous: int
    histogram: Histogram
    anomalies_all_negative: bool
    seed: Optional[int] = None
    config_digest: str = ""
    method: str = ""
    orientation: str = ""
    aggregate: Optional[SeedAggregate] = None

    def validate(self) -> list[str]:
        errors = []
        if not (0.0 <= self.auc <= 1.0):
            errors.append(f"auc must lie in [0, 1], got {self.auc}")
        if self.histogram.total != self.n_normal + self.n_anomalous:
            errors.append(f"histogram holds {self.histogram.total} scores, expected {self.n_normal + self.n_anomalous}")
        return errors


def build_report(scores: ScoreSet, bins: int = 20, seed: Optional[int] = None,
                 config_digest: str = "") -> EvalReport:
    """AUC over -decision and a histogram of the decision scores; needs both classes labelled."""
    if scores.labels is None:
        raise ConfigError("evaluation needs labelled scores")
    labels = np.asarray(scores.labels)
    auc = roc_auc(scores.anomaly_scores, labels)
    anomalous = labels == LABEL_ANOMALOUS
    report = EvalReport(
        auc=auc,
        n_normal=int(np.sum(labels == LABEL_NORMAL)),
        n_anomalous=int(np.sum(anomalous)),
        histogram=histogram(scores.decision, labels, bins),
        anomalies_all_negative=bool(np.all(scores.decision[anomalous] < 0)),
        seed=seed,
        config_digest=config_digest,
        method=scores.method,
        orientation=scores.orientation,
    )
    errors = report.validate()
    if errors:
        raise ConfigError(errors)
    return report


def save_report(report: EvalReport, path: Path) -> None:
    doc = TomlDocument(KIND_REPORT)
    doc.table("report", {
        "method": report.method,
        "orientation": report.orientation,
        "auc": report.auc,
        "n_normal": report.n_normal,
        "n_anomalous": report.n_anomalous,
        "anomalies_all_negative": report.anomalies_all_negative,
        "seed": report.seed,
        "config_digest": report.config_digest,
    })
    doc.table("histogram", {
        "edges": report.histogram.edges,
        "count_normal": report.histogram.count_normal,
        "count_anomalous": report.histogram.count_anomalous,
    })
    if report.aggregate is not None:
        agg = report.aggregate
        doc.table("seeds", {
            "seeds": list(agg.seeds),
            "aucs": list(agg.aucs),
            "mean_auc": agg.mean_auc,
            "std_auc": agg.std_auc,
        })
    doc.save(path)


def load_report(path: Path) -> EvalReport:
    data = read_document(path, {KIND_REPORT})
    rep = data["report"]
    hist = data["histogram"]
    agg = None
    if "seeds" in data:
        s = data["seeds"]
        agg = SeedAggregate(tuple(s["seeds"]), tuple(float(a) for a in s["aucs"]),
                            float(s["mean_auc"]), float(s["std_auc"]))
    return EvalReport(
        auc=float(rep["auc"]),
        n_normal=int(rep["n_normal"]),
        n_anomalous=int(rep["n_anomalous"]),
        histogram=Histogram(
            np.array(hist["edges"], dtype=np.float64),
            np.array(hist["count_normal"], dtype=np.int64),
            np.array(hist["count_anomalous"], dtype=np.int64),
        ),
        anomalies_all_negative=bool(rep["anomalies_all_negative"]),
        seed=rep.get("seed"),
        config_digest=rep.get("config_digest", ""),
        method=rep.get("method", ""),
        orientation=rep.get("orientation", ""),
        aggregate=agg,
    )


def write_histogram_csv(hist: Histogram, path: Path) -> None:
    write_table(path, HISTOGRAM_HEADER, hist.rows())
