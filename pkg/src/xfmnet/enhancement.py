"""Cross-resolution mixing of decomposed components.

A bottom-up path adds downscaled finer levels into coarser ones (used for the
seasonal parts); a top-down path adds upscaled coarser levels into finer ones
(used for the trends). Each hop mixes a multi-kernel convolution and a stacked
linear map over time through a learnable two-way softmax.
"""

from __future__ import annotations

import numpy as np

from .numerics import Module, Tensor, conv1d, conv_transpose1d, parameter, softmax
from .numerics.nn import glorot

KERNELS = (3, 5, 7)
ORDERS = {
    "season_up_trend_down": ("up", "down"),
    "season_up_trend_up": ("up", "up"),
    "season_down_trend_up": ("down", "up"),
    "season_down_trend_down": ("down", "down"),
}


def soft_fuse(a: Tensor, b: Tensor, logits: Tensor) -> Tensor:
    """``p * a + (1 - p) * b`` with ``(p, 1 - p) = softmax(logits)``."""
    if a.shape != b.shape:
        raise ValueError(f"soft_fuse shape mismatch: {a.shape} vs {b.shape}")
    p = softmax(logits, axis=-1)
    return a * p[0:1] + b * p[1:2]


class TimeLinear(Module):
    """Linear maps along the time axis of [..., T, d] inputs, ReLU between layers."""

    def __init__(self, rng: np.random.Generator, t_in: int, t_out: int, layers: int = 2):
        sizes = [t_in] + [t_out] * layers
        self.weights = [parameter(glorot(rng, a, b, (a, b))) for a, b in zip(sizes[:-1], sizes[1:])]
        self.biases = [parameter(np.zeros(b)) for b in sizes[1:]]
        self.t_in = t_in

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-2] != self.t_in:
            raise ValueError(f"expected length {self.t_in}, got {x.shape[-2]}")
        h = x.swapaxes(-1, -2)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if i:
                h = h.relu()
            h = h @ w + b
        return h.swapaxes(-1, -2)


class MultiKernelConv(Module):
    """Parallel strided convolutions (kernels 3/5/7) summed; length T -> T / k."""

    def __init__(self, rng: np.random.Generator, d: int, stride: int, transposed: bool = False):
        self.stride = stride
        self.transposed = transposed
        self.weights = []
        for ks in KERNELS:
            shape = (d, d, ks)
            self.weights.append(parameter(glorot(rng, d * ks, d * ks, shape)))
        self.bias = parameter(np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        lead = x.shape[:-2]
        T, d = x.shape[-2:]
        h = x.reshape(-1, T, d).swapaxes(1, 2)
        out = None
        for w in self.weights:
            ks = w.shape[-1]
            p = (ks - 1) // 2
            if self.transposed:
                y = conv_transpose1d(h, w, stride=self.stride, padding=p, output_padding=self.stride - 1)
            else:
                y = conv1d(h, w, stride=self.stride, padding=p)
            out = y if out is None else out + y
        out = out + self.bias.reshape(1, d, 1)
        return out.swapaxes(1, 2).reshape(*lead, out.shape[-1], d)


class EnhancementPath(Module):
    """One direction of residual cross-level mixing over a list of levels."""

    def __init__(self, rng: np.random.Generator, lengths: list[int], d: int, k: int, direction: str):
        if direction not in ("up", "down"):
            raise ValueError("direction must be 'up' (fine to coarse) or 'down' (coarse to fine)")
        self.direction = direction
        self.lengths = list(lengths)
        self.convs, self.linears, self.logits = [], [], []
        for fine, coarse in zip(lengths[:-1], lengths[1:]):
            if direction == "up":
                self.convs.append(MultiKernelConv(rng, d, k))
                self.linears.append(TimeLinear(rng, fine, coarse))
            else:
                self.convs.append(MultiKernelConv(rng, d, k, transposed=True))
                self.linears.append(TimeLinear(rng, coarse, fine))
            self.logits.append(parameter(np.zeros(2)))

    def __call__(self, levels: list[Tensor]) -> list[Tensor]:
        out = list(levels)
        if len(out) < 2:
            return out
        if len(out) != len(self.lengths):
            raise ValueError(f"expected {len(self.lengths)} levels, got {len(out)}")
        if self.direction == "up":
            for l in range(len(out) - 1):
                src = out[l]
                out[l + 1] = out[l + 1] + soft_fuse(self.convs[l](src), self.linears[l](src), self.logits[l])
        else:
            for l in reversed(range(len(out) - 1)):
                src = out[l + 1]
                out[l] = out[l] + soft_fuse(self.convs[l](src), self.linears[l](src), self.logits[l])
        return out


class EnhancementStack(Module):
    """Seasonal and trend paths for one stream; directions follow ``order``."""

    def __init__(self, rng: np.random.Generator, lengths: list[int], d: int, k: int, order: str = "season_up_trend_down"):
        if order not in ORDERS:
            raise ValueError(f"unknown enhancement order {order!r}; choose from {sorted(ORDERS)}")
        season_dir, trend_dir = ORDERS[order]
        self.seasonal = EnhancementPath(rng, lengths, d, k, season_dir)
        self.trend = EnhancementPath(rng, lengths, d, k, trend_dir)

    def seasonal_bottom_up(self, S: list[Tensor]) -> list[Tensor]:
        return self.seasonal(S)

    def trend_top_down(self, R: list[Tensor]) -> list[Tensor]:
        return self.trend(R)
