"""OCNN toolkit command-line entry point: synth, train, score, eval, paper-check."""
from __future__ import annotations
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Optional

from dotenv import find_dotenv, load_dotenv

from evaluation.seeds import SeedRunError
from runner.commands import (
    EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, EXIT_VALIDATION, PIPELINE_BLOBS, PIPELINE_SYNTHETIC,
    cmd_eval, cmd_paper_check, cmd_score, cmd_synth, cmd_train,
)
from runner.golden import DEFAULT_TOL
from shared.config import VALID_METHODS
from shared.data import VALID_SCALES
from shared.errors import ConfigError, DataParseError, DivergenceError, NumericalError, ShapeError
from shared.logging_utils import ROOT_LOGGER, log_jsonl, resolve_log_dir, setup_rotating_logger

logger = logging.getLogger("ocnn.runner")

COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "paper-check": cmd_paper_check,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--log-dir", help="log directory (default: $OCNN_LOG_DIR or ./logs)")
    p.add_argument("--verbose", "-v", action="store_true", help="debug output on the console")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    """Flags that map onto the run config; unset ones fall through to --config."""
    p.add_argument("--config", help="flat TOML run file (default: $OCNN_CONFIG)")
    p.add_argument("--method", choices=VALID_METHODS)
    p.add_argument("--nu", type=float)
    p.add_argument("--hidden", type=int, help="OC-NN hidden units")
    p.add_argument("--activation", help="linear, sigmoid, relu, leaky_relu or leaky_relu(alpha)")
    p.add_argument("--gain", type=float, help="scale on the Glorot bound for V")
    p.add_argument("--extra-layer", type=int, help="width of an extra bias-free layer before V")
    p.add_argument("--ae-arch", help="encoder widths after the input, e.g. 32,16")
    p.add_argument("--epochs", type=int, help="autoencoder epochs")
    p.add_argument("--inner-epochs", type=int)
    p.add_argument("--max-iters", type=int, help="outer alternating iterations")
    p.add_argument("--tol", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden-lr-scale", type=float)
    p.add_argument("--encoder-lr-scale", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--full-batch", action="store_true", default=None)
    p.add_argument("--no-train-encoder", dest="train_encoder", action="store_false", default=None)
    p.add_argument("--no-regularize-encoder", dest="regularize_encoder", action="store_false", default=None,
                   help="leave encoder weights out of the Frobenius penalty")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--scale", choices=sorted(VALID_SCALES))
    p.add_argument("--label-col")
    p.add_argument("--trees", type=int)
    p.add_argument("--subsample", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--bins", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocnn", description="One-class anomaly detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic train/test split")
    p.add_argument("--kind", choices=(PIPELINE_SYNTHETIC, PIPELINE_BLOBS), default=PIPELINE_SYNTHETIC)
    p.add_argument("--n-normal", type=int)
    p.add_argument("--n-anomalous", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma-normal", type=float, default=2.0)
    p.add_argument("--sigma-anomalous", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("train", help="fit a detector on a CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="model TOML path")
    p.add_argument("--history", help="per-iteration CSV (default: <out>.history.csv)")
    _add_run_flags(p)
    _add_common(p)

    p = sub.add_parser("score", help="score a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="scores CSV path")
    p.add_argument("--label-col")
    _add_common(p)

    p = sub.add_parser("eval", help="AUC and histogram from scores, or a multi-seed run")
    p.add_argument("--scores", help="scores CSV with a label column")
    p.add_argument("--seeds", help="'1..10' or '1,2,3': refit per seed")
    p.add_argument("--in", dest="input", help="training CSV for --seeds")
    p.add_argument("--test", help="test CSV for --seeds")
    p.add_argument("--pipeline", choices=(PIPELINE_SYNTHETIC, PIPELINE_BLOBS), default=PIPELINE_SYNTHETIC,
                   help="generated data per seed when --in is not given")
    p.add_argument("--out", required=True, help="report TOML path")
    p.add_argument("--histogram", help="also write the histogram as CSV")
    _add_run_flags(p)
    _add_common(p)

    p = sub.add_parser("paper-check", help="recompute the worked r-objective table")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    _add_common(p)
    return parser


def exit_code_for(exc: BaseException) -> Optional[int]:
    """Map a failure to its exit code; None for exceptions that are bugs."""
    if isinstance(exc, SeedRunError) and exc.__cause__ is not None:
        return exit_code_for(exc.__cause__)
    if isinstance(exc, (ConfigError, ShapeError, DataParseError)):
        return EXIT_VALIDATION
    if isinstance(exc, (DivergenceError, NumericalError)):
        return EXIT_DIVERGENCE
    if isinstance(exc, OSError):
        return EXIT_IO
    return None


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    args = build_parser().parse_args(argv)
    log_dir = Path(args.log_dir) if args.log_dir else resolve_log_dir()
    setup_rotating_logger(ROOT_LOGGER, log_dir,
                          console_level=logging.DEBUG if args.verbose else logging.WARNING)
    logger.info("ocnn %s", args.command)

    start = time.monotonic()
    record = {"command": args.command, "argv": list(argv) if argv is not None else sys.argv[1:]}
    try:
        code = COMMANDS[args.command](args)
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        logger.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        record["error"] = f"{type(e).__name__}: {e}"
    record.update(exit_code=code, elapsed_s=round(time.monotonic() - start, 3))
    if getattr(args, "digest", None):
        record["config_digest"] = args.digest
    if getattr(args, "artifacts", None):
        record["artifacts"] = args.artifacts
    try:
        log_jsonl(log_dir, record)
    except OSError as e:
        logger.warning("Could not write run record: %s", e)
    return code if code is not None else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
