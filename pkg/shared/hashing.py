"""Artifact and configuration digests for run provenance."""
from __future__ import annotations
import hashlib
import json
from pathlib import Path
from typing import Any


def sha256_file(path: Path, chunk_size: int = 65536) -> str:
    """Compute SHA-256 hex digest of a file."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(chunk_size):
            h.update(chunk)
    return h.hexdigest()


def config_digest(values: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    canonical = json.dumps(values, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def artifact_manifest(paths: list[Path]) -> dict[str, str | None]:
    """Maps each file name to its sha256 hex digest (None if missing)."""
    manifest = {}
    for p in paths:
        p = Path(p)
        manifest[p.name] = sha256_file(p) if p.exists() else None
    return manifest
