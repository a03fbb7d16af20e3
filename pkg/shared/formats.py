"""Persisted document schema: TOML model/report documents and CSV tables.

Every document starts with

    [document]
    schema = "ocnn-toolkit"
    version = 1
    kind = "<one of VALID_KINDS>"

Floats are written with repr() so a load after a save gives back the same
values bit for bit. Writers never add timestamps, so equal inputs give
byte-identical files.
"""
from __future__ import annotations
import json
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from shared.errors import ConfigError, DataParseError, NumericalError

SCHEMA_NAME = "ocnn-toolkit"
SCHEMA_VERSION = 1

# ---- Document kinds ----
KIND_AUTOENCODER = "autoencoder"
KIND_OCNN = "ocnn"
KIND_KDE = "kde"
KIND_IFOREST = "iforest"
KIND_AE_RECON = "ae-recon"
KIND_REPORT = "report"

VALID_KINDS = {KIND_AUTOENCODER, KIND_OCNN, KIND_KDE, KIND_IFOREST, KIND_AE_RECON, KIND_REPORT}
MODEL_KINDS = {KIND_OCNN, KIND_KDE, KIND_IFOREST, KIND_AE_RECON}

# ---- Table headers ----
SCORES_HEADER = ("raw", "decision", "predicted", "label")
HISTORY_HEADER = ("iteration", "objective", "r", "fraction_below", "objective_before_r")
HISTOGRAM_HEADER = ("bin_lo", "bin_hi", "count_normal", "count_anomalous")


def format_float(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise NumericalError(f"cannot persist non-finite value {v!r}")
    return repr(v)


def toml_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, str):
        return json.dumps(v)  # JSON string escapes are valid TOML basic strings
    if isinstance(v, np.ndarray):
        return toml_value(v.tolist())
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot persist value of type {type(v).__name__}")


class TomlDocument:
    """Line-oriented TOML writer with the [document] header filled in."""

    def __init__(self, kind: str):
        if kind not in VALID_KINDS:
            raise ConfigError(f"Unknown document kind '{kind}'")
        self.kind = kind
        self._lines = [
            "[document]",
            f'schema = "{SCHEMA_NAME}"',
            f"version = {SCHEMA_VERSION}",
            f'kind = "{kind}"',
        ]

    def table(self, name: str, values: dict[str, Any], array: bool = False) -> "TomlDocument":
        """Append [name] (or [[name]] when array) followed by key = value lines; None values are skipped."""
        self._lines.append("")
        self._lines.append(f"[[{name}]]" if array else f"[{name}]")
        for key, value in values.items():
            if value is None:
                continue
            self._lines.append(f"{key} = {toml_value(value)}")
        return self

    def render(self) -> str:
        return "\n".join(self._lines) + "\n"

    def save(self, path: Path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8")


def read_document(path: Path, kinds: Iterable[str] | None = None) -> dict[str, Any]:
    """Load a document and check its header; `kinds` restricts the accepted kinds."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise DataParseError(f"invalid TOML: {e}", str(path))
    header = data.get("document", {})
    errors = []
    if header.get("schema") != SCHEMA_NAME:
        errors.append(f"{path}: schema must be '{SCHEMA_NAME}', got {header.get('schema')!r}")
    if header.get("version") != SCHEMA_VERSION:
        errors.append(f"{path}: unsupported schema version {header.get('version')!r}")
    allowed = set(kinds) if kinds is not None else VALID_KINDS
    if header.get("kind") not in allowed:
        errors.append(f"{path}: kind must be one of {sorted(allowed)}, got {header.get('kind')!r}")
    if errors:
        raise ConfigError(errors)
    return data


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """UTF-8 CSV with a header; floats via repr, ints and strings as-is."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append(str(int(v)))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(format_float(v))
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
