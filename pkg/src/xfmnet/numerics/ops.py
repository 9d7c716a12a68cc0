"""Differentiable primitives beyond elementwise arithmetic."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor, _wrap, unbroadcast


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    ax = axis % data.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def bw(g):
        out = []
        for i in range(len(tensors)):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(bounds[i], bounds[i + 1])
            out.append(g[tuple(sl)])
        return tuple(out)

    return Tensor._from_op(data, tensors, bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._from_op(data, tensors, bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = x.data - x.data.max(axis=axis, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=axis, keepdims=True)

    def bw(g):
        gx = g * out
        gx -= out * gx.sum(axis=axis, keepdims=True)
        return (gx,)

    return Tensor._from_op(out, (x,), bw)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return Tensor._from_op(x.data * scale, (x,), lambda g: (g * scale,))


def where(mask: np.ndarray, a: Tensor, b: Tensor | float) -> Tensor:
    """Select ``a`` where ``mask`` holds, else ``b``. ``mask`` is a constant."""
    b = _wrap(b, a.dtype)
    mask = np.asarray(mask, dtype=bool)

    def bw(g):
        return unbroadcast(np.where(mask, g, 0.0), a.shape), unbroadcast(np.where(mask, 0.0, g), b.shape)

    return Tensor._from_op(np.where(mask, a.data, b.data).astype(a.dtype), (a, b), bw)


def pad(x: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    """Zero padding; ``widths`` holds one (before, after) pair per axis."""
    widths = list(widths)
    sl = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, x.shape))
    return Tensor._from_op(np.pad(x.data, widths), (x,), lambda g: (g[sl],))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = x @ weight
    return out + bias if bias is not None else out


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return Tensor._from_op(x.data * keep, (x,), lambda g: (g * keep,))


def embedding(table: Tensor, index: np.ndarray) -> Tensor:
    """Row lookup ``table[index]``; gradients scatter back to the selected rows only."""
    index = np.asarray(index)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"embedding index out of range [0, {table.shape[0]})")

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return Tensor._from_op(table.data[index], (table,), bw)


def avg_pool1d(x: Tensor, k: int, axis: int = -1) -> Tensor:
    """Non-overlapping mean pooling with window and stride ``k`` along ``axis``."""
    if k < 1:
        raise ValueError("pooling stride must be >= 1")
    ax = axis % x.ndim
    n = x.shape[ax]
    if n % k:
        raise ValueError(f"length {n} is not divisible by pooling stride {k}")
    if k == 1:
        return x
    shape = x.shape[:ax] + (n // k, k) + x.shape[ax + 1 :]
    out = np.mean(x.data.reshape(shape), axis=ax + 1, dtype=np.float64).astype(x.dtype)

    def bw(g):
        return (np.repeat(g / k, k, axis=ax).astype(x.dtype),)

    return Tensor._from_op(out, (x,), bw)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x`` [B, Cin, T] with ``weight`` [Cout, Cin, k]."""
    B, cin, T = x.shape
    cout, cin_w, k = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv1d channel mismatch: input {cin}, weight {cin_w}")
    tp = T + 2 * padding
    t_out = (tp - k) // stride + 1
    if t_out < 1:
        raise ValueError("conv1d output would be empty")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    span = stride * (t_out - 1) + 1
    cols = np.stack([xp[:, :, j : j + span : stride] for j in range(k)], axis=2)  # B,Cin,k,To
    cols = cols.reshape(B, cin * k, t_out)
    wm = weight.data.reshape(cout, cin * k)
    out = wm @ cols

    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[None, :, None]
        parents.append(bias)

    def bw(g):
        gw = np.einsum("bot,bct->oc", g, cols).reshape(weight.shape)
        gcols = (wm.T @ g).reshape(B, cin, k, t_out)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, :, j : j + span : stride] += gcols[:, :, j]
        gx = gxp[:, :, padding : padding + T]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return Tensor._from_op(out, parents, bw)


def conv_transpose1d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed 1-D convolution; ``weight`` is [Cin, Cout, k].

    Output length is ``(T - 1) * stride - 2 * padding + k + output_padding``.
    """
    B, cin, T = x.shape
    cin_w, cout, k = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv_transpose1d channel mismatch: input {cin}, weight {cin_w}")
    if output_padding >= max(stride, 1) and output_padding > 0:
        raise ValueError("output_padding must be smaller than stride")
    t_out = (T - 1) * stride - 2 * padding + k + output_padding
    span = stride * (T - 1) + 1
    buf_len = max(span + k - 1, padding + t_out)
    wm = weight.data.transpose(1, 2, 0).reshape(cout * k, cin)
    y = (wm @ x.data).reshape(B, cout, k, T)
    buf = np.zeros((B, cout, buf_len), dtype=x.dtype)
    for j in range(k):
        buf[:, :, j : j + span : stride] += y[:, :, j]
    out = buf[:, :, padding : padding + t_out]

    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[None, :, None]
        parents.append(bias)

    def bw(g):
        gbuf = np.zeros((B, cout, buf_len), dtype=g.dtype)
        gbuf[:, :, padding : padding + t_out] = g
        gy = np.stack([gbuf[:, :, j : j + span : stride] for j in range(k)], axis=2).reshape(B, cout * k, T)
        gx = wm.T @ gy
        gwm = np.einsum("bot,bct->oc", gy, x.data)
        gw = gwm.reshape(cout, k, cin).transpose(2, 0, 1)
        grads = [gx, np.ascontiguousarray(gw)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return Tensor._from_op(np.ascontiguousarray(out), parents, bw)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int | tuple[int, int] = 1,
    padding: int | tuple[int, int] = 0,
) -> Tensor:
    """2-D cross-correlation of ``x`` [B, Cin, H, W] with ``weight`` [Cout, Cin, kh, kw]."""
    sh, sw = (stride, stride) if isinstance(stride, int) else stride
    ph, pw = (padding, padding) if isinstance(padding, int) else padding
    B, cin, H, W = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    ho = (H + 2 * ph - kh) // sh + 1
    wo = (W + 2 * pw - kw) // sw + 1
    if ho < 1 or wo < 1:
        raise ValueError("conv2d output would be empty")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    span_h = sh * (ho - 1) + 1
    span_w = sw * (wo - 1) + 1
    taps = [(i, j) for i in range(kh) for j in range(kw)]
    cols = np.stack([xp[:, :, i : i + span_h : sh, j : j + span_w : sw] for i, j in taps], axis=2)
    cols = cols.reshape(B, cin * kh * kw, ho * wo)
    wm = weight.data.reshape(cout, cin * kh * kw)
    out = (wm @ cols).reshape(B, cout, ho, wo)

    parents = [x, weight]
    if bias is not None:
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def bw(g):
        g2 = g.reshape(B, cout, ho * wo)
        gw = np.einsum("bop,bcp->oc", g2, cols).reshape(weight.shape)
        gcols = (wm.T @ g2).reshape(B, cin, kh * kw, ho, wo)
        gxp = np.zeros_like(xp)
        for n, (i, j) in enumerate(taps):
            gxp[:, :, i : i + span_h : sh, j : j + span_w : sw] += gcols[:, :, n]
        gx = gxp[:, :, ph : ph + H, pw : pw + W]
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor._from_op(out, parents, bw)


def mse_loss(pred: Tensor, target) -> Tensor:
    diff = pred - _wrap(target, pred.dtype)
    return (diff * diff).mean()
