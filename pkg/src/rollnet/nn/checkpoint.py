"""Checkpoint persistence.

A checkpoint is a JSON manifest next to a binary blob. The manifest lists
every array's name, shape, and byte offset into the blob; the blob is the
arrays' float32 little-endian values concatenated in manifest order. The
manifest also carries a free-form "meta" object (model hyperparameters,
composer names, training progress).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Unreadable or version-incompatible checkpoint."""


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> Path:
    """Write `<path>.json` and `<path>.bin`; returns the manifest path."""
    base = Path(path)
    if base.suffix == ".json":
        base = base.with_suffix("")
    entries = []
    blob = bytearray()
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": len(blob)})
        blob.extend(data)
    manifest = {
        "version": FORMAT_VERSION,
        "blob": base.name + ".bin",
        "blob_bytes": len(blob),
        "meta": meta,
        "params": entries,
    }
    blob_path = base.with_suffix(".bin")
    blob_path.write_bytes(bytes(blob))
    manifest_path = base.with_suffix(".json")
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest_path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a manifest and its blob back into (arrays, meta)."""
    manifest_path = Path(path)
    if manifest_path.suffix != ".json":
        manifest_path = manifest_path.with_suffix(".json")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"cannot read checkpoint manifest {manifest_path}: {exc}") from exc
    version = manifest.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"checkpoint version {version!r} unsupported (expected {FORMAT_VERSION})"
        )
    blob_path = manifest_path.parent / manifest["blob"]
    blob = blob_path.read_bytes()
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointFormatError(
            f"blob {blob_path} has {len(blob)} bytes, manifest says {manifest['blob_bytes']}"
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        arrays[entry["name"]] = arr.reshape(shape).copy()
    return arrays, manifest["meta"]


def checkpoint_hash(path: str | Path) -> str:
    """sha256 of the blob, for generation sidecars."""
    manifest_path = Path(path)
    if manifest_path.suffix != ".json":
        manifest_path = manifest_path.with_suffix(".json")
    manifest = json.loads(manifest_path.read_text())
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    return hashlib.sha256(blob).hexdigest()
