"""Reproducibility manifest: resolved config plus output digests.

The manifest is written after every other output file, so its presence
marks a completed run.  Digests are 64-bit FNV-1a over the file bytes,
good enough to notice a changed rerun, not a security boundary.
"""

from __future__ import annotations

import json
import os
import platform

from .errors import ValidationError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

MANIFEST_NAME = "manifest.json"


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def digest_file(path) -> str:
    with open(path, "rb") as fh:
        return f"{fnv1a64(fh.read()):016x}"


def write_manifest(out_dir, resolved_config: dict, files, duration: float,
                   version: str) -> str:
    entries = []
    for name in files:
        entries.append({
            "file": name,
            "digest": digest_file(os.path.join(out_dir, name)),
        })
    doc = {
        "version": version,
        "platform": platform.platform(),
        "duration_seconds": duration,
        "config": resolved_config,
        "outputs": entries,
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {path} does not parse: {exc}") from None
    for key in ("version", "config", "outputs"):
        if key not in doc:
            raise ValidationError(f"manifest {path} lacks {key!r}")
    return doc


def output_digests(manifest: dict) -> dict:
    """file -> digest map from a parsed manifest."""
    return {e["file"]: e["digest"] for e in manifest["outputs"]}
