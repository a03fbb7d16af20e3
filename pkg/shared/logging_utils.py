"""OCNN toolkit logging utilities."""
from __future__ import annotations
import logging
import logging.handlers
import json
import os
import time
from pathlib import Path

ROOT_LOGGER = "ocnn"
DEFAULT_LOG_DIR = "logs"


def resolve_log_dir() -> Path:
    """OCNN_LOG_DIR when set (a .env file may provide it), else ./logs."""
    return Path(os.environ.get("OCNN_LOG_DIR", DEFAULT_LOG_DIR)).expanduser()


def setup_rotating_logger(name: str, log_dir: Path, level: int = logging.DEBUG,
                          console_level: int = logging.INFO) -> logging.Logger:
    """Set up a rotating file logger + console output (stderr, so stdout stays for results)."""
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / f"{name}.log"

    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not logger.handlers:
        # Rotating file handler: 5MB x 5 files
        fh = logging.handlers.RotatingFileHandler(
            log_file, maxBytes=5 * 1024 * 1024, backupCount=5, encoding="utf-8"
        )
        fh.setLevel(level)
        fmt = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")
        fh.setFormatter(fmt)
        logger.addHandler(fh)

        ch = logging.StreamHandler()
        ch.setLevel(console_level)
        ch.setFormatter(fmt)
        logger.addHandler(ch)

    return logger


def log_jsonl(log_dir: Path, record: dict) -> Path:
    """Append one run record to the daily ocnn-YYYY-MM-DD.jsonl file."""
    log_dir.mkdir(parents=True, exist_ok=True)
    date_str = time.strftime("%Y-%m-%d")
    log_file = log_dir / f"{ROOT_LOGGER}-{date_str}.jsonl"
    stamped = {"ts_utc_ms": int(time.time() * 1000), **record}
    with open(log_file, "a", encoding="utf-8") as f:
        f.write(json.dumps(stamped, sort_keys=True, default=str) + "\n")
    return log_file
