"""Aligned multiscale sampling and the sensor/image embeddings.

Both modalities are average-pooled by the same stride so each resolution
level keeps frame-to-step correspondence. Sensor rows go through a value MLP;
image frames go through a small strided conv encoder, are pooled and
projected, and then mixed along time by a one-layer graph attention over
neighbouring frames. Both streams add sinusoidal positions and learnable
hour/weekday/month tables, and a 3x1 convolution fuses them early.
"""

from __future__ import annotations

import numpy as np

from .numerics import (
    Linear,
    Module,
    Tensor,
    avg_pool1d,
    concat,
    conv2d,
    dropout,
    embedding,
    leaky_relu,
    pad,
    parameter,
    softmax,
    stack,
    where,
)
from .numerics.nn import glorot


def pool1d_downsample(x: Tensor, k: int, axis: int = -1) -> Tensor:
    """Average pooling with window and stride ``k``; the length must divide exactly."""
    return avg_pool1d(x, k, axis=axis)


def multiscale(x: Tensor, k: int, levels: int, axis: int = 1) -> list[Tensor]:
    """``[x, pool(x), pool(pool(x)), ...]`` with ``levels + 1`` entries."""
    out = [x]
    for _ in range(levels):
        out.append(pool1d_downsample(out[-1], k, axis=axis))
    return out


def align_marks(marks: np.ndarray, k: int, level: int) -> np.ndarray:
    """Calendar marks for level ``level``: each pooled step keeps its window's first raw mark."""
    return marks[..., :: k**level, :]


def sinusoidal_pe(T: int, d: int) -> np.ndarray:
    if d % 2:
        raise ValueError(f"positional encoding needs an even dimension, got {d}")
    t = np.arange(T, dtype=np.float64)[:, None]
    freq = 10000.0 ** (np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.zeros((T, d))
    pe[:, 0::2] = np.sin(t / freq)
    pe[:, 1::2] = np.cos(t / freq)
    return pe


class PeriodicEmbedding(Module):
    """Sum of hour-of-day, weekday and month lookup rows."""

    SIZES = (24, 7, 12)

    def __init__(self, rng: np.random.Generator, d: int, scale: float = 0.02):
        self.hour, self.weekday, self.month = (
            parameter(rng.standard_normal((n, d)) * scale) for n in self.SIZES
        )

    def __call__(self, marks: np.ndarray) -> Tensor:
        marks = np.asarray(marks)
        for col, n in enumerate(self.SIZES):
            v = marks[..., col]
            if v.size and (v.min() < 0 or v.max() >= n):
                raise IndexError(f"calendar index in column {col} outside [0, {n})")
        return embedding(self.hour, marks[..., 0]) + embedding(self.weekday, marks[..., 1]) + embedding(
            self.month, marks[..., 2]
        )


def _positional(T: int, d: int, dtype) -> Tensor:
    return Tensor(sinusoidal_pe(T, d).astype(dtype))


class SeriesEmbedding(Module):
    """Value MLP (two linear layers, ReLU, dropout) plus positional and periodic rows."""

    def __init__(self, rng: np.random.Generator, n_stations: int, d: int, p_drop: float = 0.1):
        self.fc1 = Linear(rng, n_stations, d)
        self.fc2 = Linear(rng, d, d)
        self.periodic = PeriodicEmbedding(rng, d)
        self.p_drop = p_drop
        self._rng = np.random.default_rng(rng.integers(2**63))
        self.d = d

    def __call__(self, x: Tensor, marks: np.ndarray) -> Tensor:
        if x.shape[-1] != self.fc1.d_in:
            raise ValueError(f"expected {self.fc1.d_in} stations, got {x.shape[-1]}")
        h = dropout(self.fc1(x).relu(), self.p_drop, self._rng, self.training)
        value = self.fc2(h)
        return value + _positional(x.shape[-2], self.d, x.dtype) + self.periodic(marks)


class GraphAttention(Module):
    """Single-head graph attention over frames linked when ``|t - t'| <= radius``."""

    def __init__(self, rng: np.random.Generator, d: int, radius: int = 2, slope: float = 0.2):
        self.weight = parameter(glorot(rng, d, d, (d, d)))
        self.att_src = parameter(glorot(rng, d, 1, (d, 1)))
        self.att_dst = parameter(glorot(rng, d, 1, (d, 1)))
        self.radius = radius
        self.slope = slope

    def __call__(self, f: Tensor, return_attention: bool = False):
        T = f.shape[-2]
        r = self.radius
        if r >= T:
            raise ValueError(f"adjacency radius {r} must be smaller than sequence length {T}")
        h = f @ self.weight
        src = h @ self.att_src  # (..., T, 1)
        dst = h @ self.att_dst
        lead = [(0, 0)] * (h.ndim - 2)
        hp = pad(h, lead + [(r, r), (0, 0)])
        dp = pad(dst, lead + [(r, r), (0, 0)])
        offsets = range(-r, r + 1)
        valid = np.stack([(np.arange(T) + o >= 0) & (np.arange(T) + o < T) for o in offsets], axis=-1)
        scores = concat([src + dp[..., r + o : r + o + T, :] for o in offsets], axis=-1)  # (..., T, 2r+1)
        scores = where(valid, leaky_relu(scores, self.slope), -1e9)
        att = softmax(scores, axis=-1)
        neigh = stack([hp[..., r + o : r + o + T, :] for o in offsets], axis=-2)  # (..., T, 2r+1, d)
        out = (neigh * att.reshape(att.shape + (1,))).sum(axis=-2)
        return (out, att) if return_attention else out


class ImageEmbedding(Module):
    """Graph-attention value embedding plus positional and periodic rows."""

    def __init__(self, rng: np.random.Generator, d: int, radius: int = 2):
        self.gat = GraphAttention(rng, d, radius)
        self.periodic = PeriodicEmbedding(rng, d)
        self.d = d

    def __call__(self, f: Tensor, marks: np.ndarray) -> Tensor:
        if f.shape[-1] != self.d:
            raise ValueError(f"expected image features of width {self.d}, got {f.shape[-1]}")
        return self.gat(f) + _positional(f.shape[-2], self.d, f.dtype) + self.periodic(marks)


class ImageEncoder(Module):
    """Two stride-2 3x3 convolutions with ReLU, then a global spatial mean.

    Maps frames [..., T, C, H, W] to per-frame features [..., T, d_out].
    """

    def __init__(self, rng: np.random.Generator, channels: int, d_out: int, hidden: int = 8):
        self.channels = channels
        self.w1 = parameter(glorot(rng, channels * 9, hidden * 9, (hidden, channels, 3, 3)))
        self.b1 = parameter(np.zeros(hidden))
        self.w2 = parameter(glorot(rng, hidden * 9, d_out * 9, (d_out, hidden, 3, 3)))
        self.b2 = parameter(np.zeros(d_out))

    def __call__(self, frames: Tensor) -> Tensor:
        *lead, C, H, W = frames.shape
        if C != self.channels:
            raise ValueError(f"image encoder expects {self.channels} channels, got {C}")
        if H < 4 or W < 4:
            raise ValueError("frames must be at least 4x4")
        x = frames.reshape(-1, C, H, W)
        x = conv2d(x, self.w1, self.b1, stride=2, padding=1).relu()
        x = conv2d(x, self.w2, self.b2, stride=2, padding=1).relu()
        feats = x.mean(axis=(2, 3))
        return feats.reshape(*lead, feats.shape[-1])


class EarlyFusion(Module):
    """Concatenate two [..., T, d] streams on channels and compress with a 3x1 2-D convolution."""

    def __init__(self, rng: np.random.Generator, d: int):
        self.weight = parameter(glorot(rng, 2 * d * 3, d * 3, (d, 2 * d, 3, 1)))
        self.bias = parameter(np.zeros(d))
        self.d = d

    def __call__(self, f_temp: Tensor, f_img: Tensor) -> Tensor:
        if f_temp.shape != f_img.shape:
            raise ValueError(f"early fusion shape mismatch: {f_temp.shape} vs {f_img.shape}")
        *lead, T, d = f_temp.shape
        x = concat([f_temp, f_img], axis=-1).reshape(-1, T, 2 * d)
        x = x.transpose(0, 2, 1).reshape(-1, 2 * d, T, 1)
        y = conv2d(x, self.weight, self.bias, stride=1, padding=(1, 0))  # (N, d, T, 1)
        y = y.reshape(-1, d, T).transpose(0, 2, 1)
        return y.reshape(*lead, T, d)
