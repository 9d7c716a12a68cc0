"""Series CSV and image-blob files.

Series files are CSV with header ``timestamp,station_1,...,station_M`` and
ISO-8601 minute-resolution timestamps. Image files are a raw little-endian
float32 blob ``[T, C, H, W]`` next to a JSON manifest with the same stem.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """A data file does not follow its format; the message names the file and line."""


def image_manifest_path(blob: str | Path) -> Path:
    return Path(blob).with_suffix(".json")


def write_series_csv(path: str | Path, timestamps: np.ndarray, series: np.ndarray) -> Path:
    path = Path(path)
    series = np.asarray(series, dtype=np.float64)
    stamps = np.datetime_as_string(np.asarray(timestamps).astype("datetime64[m]"), unit="m")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + [f"station_{m + 1}" for m in range(series.shape[1])])
        for ts, row in zip(stamps, series):
            writer.writerow([ts] + [repr(float(v)) for v in row])
    return path


def read_series_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(timestamps datetime64[m] [T], series float64 [T, M])``.

    Raises
    ------
    FormatError
        On a bad header, ragged rows, unparseable timestamps or non-numeric cells.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None:
            raise FormatError(f"{path}: line 1: empty file")
        M = len(header) - 1
        expected = ["timestamp"] + [f"station_{m + 1}" for m in range(M)]
        if M < 1 or header != expected:
            raise FormatError(f"{path}: line 1: header must be timestamp,station_1..station_M; got {','.join(header)}")
        stamps, values = [], []
        for line, row in enumerate(rows, start=2):
            if len(row) != M + 1:
                raise FormatError(f"{path}: line {line}: expected {M + 1} fields, got {len(row)}")
            try:
                stamps.append(np.datetime64(row[0], "m"))
            except ValueError:
                raise FormatError(f"{path}: line {line}: bad timestamp {row[0]!r}") from None
            try:
                values.append([float(v) for v in row[1:]])
            except ValueError:
                raise FormatError(f"{path}: line {line}: non-numeric cell in {row[1:]!r}") from None
    if not values:
        raise FormatError(f"{path}: no data rows")
    series = np.asarray(values, dtype=np.float64)
    if not np.isfinite(series).all():
        bad = int(np.flatnonzero(~np.isfinite(series).all(axis=1))[0]) + 2
        raise FormatError(f"{path}: line {bad}: non-finite value")
    return np.asarray(stamps, dtype="datetime64[m]"), series


def write_image_blob(path: str | Path, frames: np.ndarray) -> Path:
    path = Path(path)
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 4:
        raise ValueError("frames must be [T, C, H, W]")
    path.write_bytes(frames.tobytes())
    T, C, H, W = frames.shape
    manifest = {"T": T, "C": C, "H": H, "W": W, "dtype": "float32", "byteorder": "little"}
    image_manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_image_blob(path: str | Path) -> np.ndarray:
    """Load ``[T, C, H, W]`` float32 frames, checking the blob size against the manifest."""
    path = Path(path)
    manifest_path = image_manifest_path(path)
    if not manifest_path.exists():
        raise FormatError(f"{path}: missing manifest {manifest_path.name}")
    try:
        manifest = json.loads(manifest_path.read_text())
        shape = tuple(int(manifest[k]) for k in ("T", "C", "H", "W"))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{manifest_path}: malformed manifest ({exc})") from None
    if manifest.get("dtype", "float32") != "float32" or manifest.get("byteorder", "little") != "little":
        raise FormatError(f"{manifest_path}: only little-endian float32 blobs are supported")
    raw = path.read_bytes()
    if len(raw) != 4 * int(np.prod(shape)):
        raise FormatError(f"{path}: {len(raw)} bytes do not match manifest shape {shape}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
