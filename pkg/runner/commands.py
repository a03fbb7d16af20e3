"""Subcommand implementations. Each returns an exit code; errors propagate to __main__."""
from __future__ import annotations
import argparse
import dataclasses
import logging
import os
import re
from pathlib import Path
from typing import Any, Optional

from evaluation.pipelines import (
    blob_config, blob_runner, dataset_runner, fit_method, score_dataset, synthetic_config,
    synthetic_runner,
)
from evaluation.report import EvalReport, build_report, save_report, write_histogram_csv
from evaluation.seeds import multi_seed_eval
from learners.ocnn import HistoryRow, ScoreSet, write_history
from learners.persistence import load_model, save_autoencoder, save_model
from learners.scoring import method_of
from runner.golden import golden_quantile, golden_rows
from shared.config import (
    METHOD_AE_RECON, METHOD_OCNN, ORIENTATIONS, RunConfig, build_run_config, load_run_config,
)
from shared.data import gen_blobs, gen_synthetic, load_delimited, save_delimited
from shared.errors import ConfigError, DivergenceError, NumericalError
from shared.formats import SCORES_HEADER, write_table
from shared.hashing import artifact_manifest, config_digest, sha256_file

logger = logging.getLogger("ocnn.runner.commands")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4

PIPELINE_SYNTHETIC = "synthetic"
PIPELINE_BLOBS = "blobs"

# argparse dest -> RunConfig key, for every flag that maps onto the run config
RUN_FLAGS = {
    "method": "method", "nu": "nu", "hidden": "hidden", "activation": "activation", "gain": "gain",
    "extra_layer": "extra_layer", "ae_arch": "ae_arch", "epochs": "epochs",
    "inner_epochs": "inner_epochs", "max_iters": "max_iters", "tol": "tol", "lr": "lr",
    "hidden_lr_scale": "hidden_lr_scale", "encoder_lr_scale": "encoder_lr_scale", "batch": "batch", "full_batch": "full_batch",
    "seed": "seed", "workers": "workers", "scale": "scale", "label_col": "label_col",
    "train_encoder": "train_encoder", "regularize_encoder": "regularize_encoder", "trees": "trees", "subsample": "subsample",
    "folds": "folds", "bins": "bins", "seeds": "seeds",
}


def parse_int_list(text: str) -> list[int]:
    """'32,16' -> [32, 16]."""
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")


def parse_seeds(text: str) -> list[int]:
    """'1..10' (inclusive) or '1,2,3'."""
    m = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ConfigError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return parse_int_list(text)


def _file_values(args: argparse.Namespace) -> dict[str, Any]:
    path = getattr(args, "config", None) or os.environ.get("OCNN_CONFIG")
    return load_run_config(Path(path)) if path else {}


def run_config_from(args: argparse.Namespace, base: Optional[RunConfig] = None) -> RunConfig:
    """Config file (--config, else $OCNN_CONFIG) overlaid with explicit flags, over base."""
    file_values = _file_values(args)
    overrides: dict[str, Any] = {}
    for dest, key in RUN_FLAGS.items():
        value = getattr(args, dest, None)
        if dest == "ae_arch" and isinstance(value, str):
            value = parse_int_list(value)
        elif dest == "seeds" and isinstance(value, str):
            value = parse_seeds(value)
        overrides[key] = value
    return build_run_config(file_values, overrides, base)


# ---- synth ----

def _given(value: Optional[int], default: int) -> int:
    return default if value is None else value


def cmd_synth(args: argparse.Namespace) -> int:
    if args.kind == PIPELINE_BLOBS:
        train, test = gen_blobs(
            n_normal=_given(args.n_normal, 500), n_anomalous=_given(args.n_anomalous, 50),
            d=_given(args.dim, 64), seed=args.seed,
        )
    else:
        train, test = gen_synthetic(
            n_normal=_given(args.n_normal, 190), n_anomalous=_given(args.n_anomalous, 10),
            d=_given(args.dim, 512),
            sigma_normal=args.sigma_normal, sigma_anomalous=args.sigma_anomalous, seed=args.seed,
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_delimited(train, out / "train.csv")
    save_delimited(test, out / "test.csv")
    print(f"train: {train.n} x {train.d}  test: {test.n} x {test.d}  seed: {args.seed}")
    print(f"wrote {out / 'train.csv'} and {out / 'test.csv'}")
    return EXIT_OK


# ---- train ----

def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = run_config_from(args)
    data = load_delimited(Path(args.input), label_column=cfg.label_col)
    out = Path(args.out)
    history_path = Path(args.history) if args.history else _sibling(out, ".history.csv")
    try:
        fit = fit_method(cfg, data)
    except (DivergenceError, NumericalError) as e:
        rows = [h for h in e.history if isinstance(h, HistoryRow)]
        if rows:
            write_history(rows, history_path)
            logger.error("Partial history written to %s", history_path)
        raise

    save_model(fit.model, out, fit.transform)
    written = [out]
    if fit.history:
        write_history(fit.history, history_path)
        written.append(history_path)
    if fit.autoencoder is not None and cfg.method != METHOD_AE_RECON:
        ae_path = _sibling(out, ".autoencoder.toml")
        save_autoencoder(fit.autoencoder, ae_path, fit.ae_losses)
        written.append(ae_path)

    summary = f"method: {method_of(fit.model)}  N: {data.n}  D: {data.d}  r: {fit.model.r!r}"
    if fit.history:
        last = fit.history[-1]
        summary += f"  iterations: {last.iteration}  objective: {last.objective:.6g}"
    print(summary)
    for p in written:
        print(f"wrote {p}")
    args.artifacts = artifact_manifest(written)
    args.digest = config_digest(cfg.as_dict())
    return EXIT_OK


# ---- score ----

def write_scores(scores: ScoreSet, path: Path) -> None:
    labels = scores.labels if scores.labels is not None else [None] * scores.raw.size
    write_table(path, SCORES_HEADER, (
        (float(raw), float(dec), int(pred), None if lab is None else int(lab))
        for raw, dec, pred, lab in zip(scores.raw, scores.decision, scores.predicted, labels)
    ))


def cmd_score(args: argparse.Namespace) -> int:
    model, transform = load_model(Path(args.model))
    data = load_delimited(Path(args.input), label_column=args.label_col)
    scores = score_dataset(model, transform, data)
    write_scores(scores, Path(args.out))
    n_anom = int(scores.predicted.sum())
    print(f"scored {data.n} rows: {n_anom} predicted anomalous, {data.n - n_anom} normal")
    print(f"wrote {args.out}")
    args.artifacts = artifact_manifest([Path(args.model), Path(args.out)])
    return EXIT_OK


# ---- eval ----

def read_scores(path: Path, method: str) -> ScoreSet:
    table = load_delimited(path, label_column="label")
    if table.n == 0:
        raise ConfigError(f"{path}: no scores to evaluate")
    if table.feature_names is not None and tuple(table.feature_names[:2]) != SCORES_HEADER[:2]:
        raise ConfigError(f"{path}: expected columns {', '.join(SCORES_HEADER)}")
    raw = table.X[:, 0].copy()
    decision = table.X[:, 1].copy()
    return ScoreSet(raw, decision, float(raw[0] - decision[0]), table.labels, method, ORIENTATIONS[method])


def _seed_runner(cfg: RunConfig, args: argparse.Namespace):
    if args.input:
        if not args.test:
            raise ConfigError("--seeds with --in also needs --test")
        train = load_delimited(Path(args.input), label_column=cfg.label_col)
        test = load_delimited(Path(args.test), label_column=cfg.label_col)
        return dataset_runner(cfg, train, test)
    if args.pipeline == PIPELINE_BLOBS:
        return blob_runner(cfg)
    return synthetic_runner(cfg)


def _pipeline_base(args: argparse.Namespace) -> Optional[RunConfig]:
    """Without data files, the generated pipeline supplies defaults under file values and flags."""
    if args.input:
        return None
    if args.pipeline == PIPELINE_BLOBS:
        return blob_config()
    return synthetic_config(args.method or _file_values(args).get("method", METHOD_OCNN))


def cmd_eval(args: argparse.Namespace) -> int:
    out = Path(args.out)
    cfg = run_config_from(args)
    if cfg.seeds:
        cfg = run_config_from(args, _pipeline_base(args))
        seeds = cfg.seeds
        result = multi_seed_eval(_seed_runner(cfg, args), seeds, cfg.workers)
        report: EvalReport = dataclasses.replace(result.reports[0], aggregate=result.aggregate, seed=None)
        for r in result.reports:
            print(f"seed {r.seed}: AUC {r.auc:.4f}  anomalies all negative: {r.anomalies_all_negative}")
        print(f"mean AUC {result.mean_auc:.4f}  std {result.std_auc:.4f}  over {len(seeds)} seeds")
    else:
        if not args.scores:
            raise ConfigError("eval needs --scores, or --seeds for a multi-seed run")
        scores_path = Path(args.scores)
        scores = read_scores(scores_path, cfg.method)
        digest = config_digest({**cfg.as_dict(), "scores_sha256": sha256_file(scores_path)})
        report = build_report(scores, cfg.bins, cfg.seed, digest)
        print(f"AUC {report.auc:.4f}  normal {report.n_normal}  anomalous {report.n_anomalous}  "
              f"anomalies all negative: {report.anomalies_all_negative}")
    save_report(report, out)
    print(f"wrote {out}")
    if args.histogram:
        write_histogram_csv(report.histogram, Path(args.histogram))
        print(f"wrote {args.histogram}")
    args.artifacts = artifact_manifest([out] + ([Path(args.histogram)] if args.histogram else []))
    args.digest = config_digest(cfg.as_dict())
    return EXIT_OK


# ---- golden table check ----

def cmd_paper_check(args: argparse.Namespace) -> int:
    rows = golden_rows(args.tol)
    for row in rows:
        print(row.line())
    r, r_ok = golden_quantile()
    print(f"nu_quantile r={r:g}  {'PASS' if r_ok else 'FAIL'}")
    ok = r_ok and all(row.passed for row in rows)
    print("all rows pass" if ok else "some rows FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED

