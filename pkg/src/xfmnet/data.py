"""Chronological splits, per-station normalization and sliding forecast windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPLIT_RATIOS = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class Split:
    """Half-open row range ``[lo, hi)`` whose targets must fall in ``[target_lo, hi)``."""

    name: str
    lo: int
    hi: int
    target_lo: int


def chronological_splits(T: int, lookback: int, horizon: int, ratios=SPLIT_RATIOS) -> dict[str, Split]:
    """7:1:2 split; validation and test inputs may reach back ``lookback`` rows."""
    if T < lookback + horizon:
        raise ValueError(f"series of length {T} is shorter than lookback {lookback} + horizon {horizon}")
    n_train = int(T * ratios[0])
    n_val = int(T * ratios[1])
    bounds = {
        "train": Split("train", 0, n_train, 0),
        "val": Split("val", max(0, n_train - lookback), n_train + n_val, n_train),
        "test": Split("test", max(0, n_train + n_val - lookback), T, n_train + n_val),
    }
    for sp in bounds.values():
        if window_total(sp, lookback, horizon) < 1:
            raise ValueError(f"{sp.name} split holds no complete window; lengthen the series")
    return bounds


def window_total(split: Split, lookback: int, horizon: int) -> int:
    first = max(split.lo, split.target_lo - lookback)
    return max(0, split.hi - horizon - lookback - first + 1)


def window_starts(split: Split, lookback: int, horizon: int) -> np.ndarray:
    first = max(split.lo, split.target_lo - lookback)
    return first + np.arange(window_total(split, lookback, horizon))


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, series: np.ndarray) -> "Normalizer":
        mean = series.mean(axis=0)
        std = series.std(axis=0)
        return cls(mean, np.where(std > 0, std, 1.0))

    def apply(self, series: np.ndarray) -> np.ndarray:
        return (series - self.mean) / self.std

    def invert(self, series: np.ndarray) -> np.ndarray:
        return series * self.std + self.mean


class WindowDataset:
    """Normalized series, frames and calendar marks, cut into forecast windows on demand.

    ``batch(starts)`` returns ``(x [B, L, M], frames [B, L, C, H, W],
    marks [B, L, 3], y [B, M, tau])`` with ``y`` the next ``tau`` rows.
    """

    def __init__(self, series, frames, marks, lookback: int, horizon: int, normalizer: Normalizer | None = None):
        series = np.asarray(series, dtype=np.float64)
        if frames.shape[0] != series.shape[0] or marks.shape[0] != series.shape[0]:
            raise ValueError(
                f"length mismatch: series {series.shape[0]}, frames {frames.shape[0]}, marks {marks.shape[0]}"
            )
        self.splits = chronological_splits(series.shape[0], lookback, horizon)
        sp = self.splits["train"]
        self.normalizer = normalizer or Normalizer.fit(series[sp.lo : sp.hi])
        self.values = self.normalizer.apply(series).astype(np.float32)
        self.frames = np.asarray(frames, dtype=np.float32)
        self.marks = np.asarray(marks, dtype=np.int64)
        self.lookback, self.horizon = lookback, horizon

    @property
    def n_stations(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.frames.shape[1]

    def starts(self, split: str) -> np.ndarray:
        return window_starts(self.splits[split], self.lookback, self.horizon)

    def batch(self, starts: np.ndarray):
        L, H = self.lookback, self.horizon
        idx = np.asarray(starts)[:, None] + np.arange(L)
        tgt = np.asarray(starts)[:, None] + L + np.arange(H)
        x = self.values[idx]
        y = self.values[tgt].transpose(0, 2, 1)
        return x, self.frames[idx], self.marks[idx], y


def seasonal_naive(x: np.ndarray, horizon: int, period: int) -> np.ndarray:
    """Repeat the last ``period`` observed rows: ``x [B, L, M] -> [B, M, horizon]``."""
    if period < 1 or period > x.shape[-2]:
        raise ValueError(f"season period {period} must lie in [1, {x.shape[-2]}]")
    last = x[..., -period:, :]
    reps = -(-horizon // period)
    out = np.concatenate([last] * reps, axis=-2)[..., :horizon, :]
    return np.swapaxes(out, -1, -2)
