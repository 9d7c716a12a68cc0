"""Checkpoint directories: ``manifest.json`` plus one little-endian float32 blob."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

MANIFEST = "manifest.json"
BLOB = "tensors.bin"


def save_checkpoint(directory: str | Path, tensors: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    offset = 0
    chunks = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries[name] = {"shape": list(arr.shape), "dtype": "float32", "offset": offset}
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    (directory / BLOB).write_bytes(b"".join(chunks))
    manifest = {"format": "xfmnet-checkpoint", "version": 1, "byteorder": "little", "tensors": entries}
    if meta:
        manifest["meta"] = meta
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def load_checkpoint(directory: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    blob = (directory / BLOB).read_bytes()
    tensors = {}
    for name, entry in manifest["tensors"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        if start + 4 * count > len(blob):
            raise ValueError(f"checkpoint blob truncated at tensor {name!r}")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=start).reshape(shape).astype(np.float32)
    return tensors, manifest.get("meta", {})
