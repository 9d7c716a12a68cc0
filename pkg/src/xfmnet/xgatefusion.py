"""Cross-modal gated fusion of decomposed components.

At every level the seasonal parts of the sensor and image streams are fused
in stages:

1. bidirectional attention whose mask is the tanh of a frequency-domain
   cross-correlation between one stream's queries and the other's keys;
2. a sigmoid-weighted interpolation back towards each original stream;
3. a sigmoid gate over the concatenated streams, refined by multi-head
   self-attention and a feed-forward residual on the concatenation.

The trend parts go through an independent copy of the same block. The early
fused stream is added to each result, and a learnable weight mixes the
seasonal and trend summaries before a shared feed-forward block. The
recursion helper re-runs a level-joint fusion step with the original inputs
re-injected as a fixed anchor.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .numerics import FeedForward, Linear, Module, Tensor, concat, freq_cross_correlate, parameter, softmax

PROBE_STAGES = ("A_t<->i", "S_f", "Z_hat")


def interpolate(a: Tensor, s_orig: Tensor, alpha_logit: Tensor) -> Tensor:
    """``sigmoid(alpha) * a + (1 - sigmoid(alpha)) * s_orig``."""
    if a.shape != s_orig.shape:
        raise ValueError(f"interpolate shape mismatch: {a.shape} vs {s_orig.shape}")
    p = alpha_logit.sigmoid()
    return a * p + s_orig * (1.0 - p)


class CrossAttention(Module):
    """Bidirectional correlation-masked attention between two [..., T, d] streams.

    For a head slice, ``A = tanh(xcorr(Q_a, K_b)) * V_b`` where ``xcorr`` is
    the circular correlation along time. The correlation and the tanh act per
    channel, so evaluating all heads at once gives the same numbers as a
    per-head loop; ``heads`` only constrains the projection width.
    """

    def __init__(self, rng: np.random.Generator, d: int, heads: int = 2):
        if d % heads:
            raise ValueError(f"model width {d} is not divisible by {heads} cross-attention heads")
        self.heads = heads
        self.q_temp, self.k_temp, self.v_temp = (Linear(rng, d, d, bias=False) for _ in range(3))
        self.q_img, self.k_img, self.v_img = (Linear(rng, d, d, bias=False) for _ in range(3))

    def __call__(self, s_temp: Tensor, s_img: Tensor) -> tuple[Tensor, Tensor]:
        if s_temp.shape != s_img.shape:
            raise ValueError(f"cross attention shape mismatch: {s_temp.shape} vs {s_img.shape}")
        a_t_from_i = freq_cross_correlate(self.q_temp(s_temp), self.k_img(s_img)).tanh() * self.v_img(s_img)
        a_i_from_t = freq_cross_correlate(self.q_img(s_img), self.k_temp(s_temp)).tanh() * self.v_temp(s_temp)
        return a_t_from_i, a_i_from_t


class MultiHeadSelfAttention(Module):
    """Unmasked scaled dot-product self-attention along time."""

    def __init__(self, rng: np.random.Generator, d: int, heads: int = 4):
        if d % heads:
            raise ValueError(f"model width {d} is not divisible by {heads} attention heads")
        self.heads = heads
        self.query, self.key, self.value = (Linear(rng, d, d) for _ in range(3))

    def _split(self, x: Tensor) -> Tensor:
        *lead, T, d = x.shape
        return x.reshape(*lead, T, self.heads, d // self.heads).swapaxes(-2, -3)

    def __call__(self, x: Tensor) -> Tensor:
        *lead, T, d = x.shape
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(d // self.heads))
        out = softmax(scores, axis=-1) @ v  # (..., heads, T, d_h)
        return out.swapaxes(-2, -3).reshape(*lead, T, d)


class GateFusion(Module):
    """Sigmoid gate between two streams plus attention and feed-forward residuals."""

    def __init__(self, rng: np.random.Generator, d: int, d_hidden: int, heads: int = 4):
        self.gate = Linear(rng, 2 * d, d)
        self.attention = MultiHeadSelfAttention(rng, d, heads)
        self.proj = Linear(rng, d, d)
        self.ffn = FeedForward(rng, 2 * d, d_hidden, d)

    def gate_values(self, s_temp: Tensor, s_img: Tensor) -> Tensor:
        return self.gate(concat([s_temp, s_img], axis=-1)).sigmoid()

    def __call__(self, s_temp: Tensor, s_img: Tensor) -> Tensor:
        if s_temp.shape != s_img.shape:
            raise ValueError(f"gate fusion shape mismatch: {s_temp.shape} vs {s_img.shape}")
        both = concat([s_temp, s_img], axis=-1)
        g = self.gate(both).sigmoid()
        mixed = g * s_temp + (1.0 - g) * s_img
        return mixed + self.ffn(both) + self.proj(self.attention(mixed))


class XGateFusion(Module):
    """Stages one to four for one component (seasonal or trend) at one level."""

    def __init__(self, rng: np.random.Generator, d: int, d_hidden: int, cross_heads: int = 2, gate_heads: int = 4):
        self.cross = CrossAttention(rng, d, cross_heads)
        self.alpha_temp = parameter(np.zeros(1))
        self.alpha_img = parameter(np.zeros(1))
        self.fuse = GateFusion(rng, d, d_hidden, gate_heads)

    def __call__(self, s_temp: Tensor, s_img: Tensor, s_con: Tensor, probes: dict | None = None) -> Tensor:
        a_t, a_i = self.cross(s_temp, s_img)
        s_t_hat = interpolate(a_t, s_temp, self.alpha_temp)
        s_i_hat = interpolate(a_i, s_img, self.alpha_img)
        s_f = self.fuse(s_t_hat, s_i_hat)
        if probes is not None:
            probes["A_t<->i"] = 0.5 * (a_t.data + a_i.data)
            probes["S_f"] = s_f.data
        return s_f + s_con


class MeanFusion(Module):
    """Ablation stand-in: the cross-modal stages collapse to an elementwise mean."""

    def __call__(self, s_temp: Tensor, s_img: Tensor, s_con: Tensor, probes: dict | None = None) -> Tensor:
        s_f = (s_temp + s_img) * 0.5
        if probes is not None:
            probes["A_t<->i"] = s_f.data
            probes["S_f"] = s_f.data
        return s_f + s_con


def integrate_seasonal_trend(
    s_bar: Tensor, r_bar: Tensor, alpha_logit: Tensor, ffn: Callable[[Tensor], Tensor], residual: bool = False
) -> Tensor:
    """Mix the seasonal and trend summaries with ``sigmoid(alpha)`` and apply the shared block."""
    z = interpolate(s_bar, r_bar, alpha_logit)
    out = ffn(z)
    return out + z if residual else out


class FusionLevel(Module):
    """All fusion parameters for one resolution level.

    ``mode="xgf"`` uses the gated fusion block for both components;
    ``mode="mean"`` swaps it for :class:`MeanFusion` while keeping the
    seasonal-trend integration and the shared feed-forward block.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        d: int,
        d_ff: int = 16,
        cross_heads: int = 2,
        gate_heads: int = 4,
        mode: str = "xgf",
        ffn_residual: bool = False,
    ):
        if mode == "xgf":
            self.seasonal = XGateFusion(rng, d, d_ff, cross_heads, gate_heads)
            self.trend = XGateFusion(rng, d, d_ff, cross_heads, gate_heads)
        elif mode == "mean":
            self.seasonal, self.trend = MeanFusion(), MeanFusion()
        else:
            raise ValueError(f"unknown fusion mode {mode!r}")
        self.mode = mode
        self.alpha = parameter(np.zeros(1))
        self.ffn = FeedForward(rng, d, d_ff, d)
        self.ffn_residual = ffn_residual

    def refine(self, z: Tensor) -> Tensor:
        """The shared feed-forward block, reused by the recursion."""
        out = self.ffn(z)
        return out + z if self.ffn_residual else out

    def __call__(self, seasonal: Sequence[Tensor], trend: Sequence[Tensor], probes: dict | None = None) -> Tensor:
        """Fuse ``(S_temp, S_img, S_con)`` and ``(R_temp, R_img, R_con)`` into ``Z_hat``."""
        s_bar = self.seasonal(*seasonal, probes=probes)
        r_bar = self.trend(*trend)
        z_hat = integrate_seasonal_trend(s_bar, r_bar, self.alpha, self.ffn, self.ffn_residual)
        if probes is not None:
            probes["Z_hat"] = z_hat.data
        return z_hat


def recursive_fuse(
    anchor: Sequence[Sequence[Tensor]],
    n: int,
    g: Callable[[list[list[Tensor]]], list[Tensor]],
    refine: Callable[[int, Tensor], Tensor],
) -> list[Tensor]:
    """Run ``g`` ``n`` times with the original per-level streams as an additive anchor.

    ``anchor[l]`` holds the level's input streams. Round one is ``g(anchor)``;
    each later round feeds ``anchor[l][j] + refine(l, Z_hat[l])`` for every
    stream ``j``. The anchor tensors are only read, never modified.
    """
    if n < 1:
        raise ValueError(f"recursion depth must be at least 1, got {n}")
    z = g([list(streams) for streams in anchor])
    for _ in range(1, n):
        feed = []
        for l, streams in enumerate(anchor):
            extra = refine(l, z[l])
            feed.append([f + extra for f in streams])
        z = g(feed)
    return z
