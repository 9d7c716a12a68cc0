"""Local trend decomposition with a frozen kernel basis.

Each overlapping window is mean-centred, every centred row is matched to the
kernel bases by cosine similarity, the softmax of those similarities mixes the
bases into a local trend (plus the window mean), and local trends are averaged
wherever windows overlap. The seasonal part is the residual ``F - R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Module, Tensor


class KernelBank(Module):
    """``K`` unit-norm basis vectors of dimension ``d``, fixed once fitted."""

    def __init__(self, bases: np.ndarray, explained_variance_ratio: np.ndarray | None = None):
        bases = np.asarray(bases, dtype=np.float32)
        if bases.ndim != 2 or bases.shape[0] < 1:
            raise ValueError("kernel bank needs a [K, d] array with K >= 1")
        if (np.linalg.norm(bases, axis=1) == 0).any():
            raise ValueError("kernel bases must be non-zero")
        self.bases = Tensor(bases)
        self.frozen = True
        self.explained_variance_ratio = (
            np.zeros(len(bases)) if explained_variance_ratio is None else np.asarray(explained_variance_ratio)
        )

    @property
    def K(self) -> int:
        return self.bases.shape[0]

    @property
    def d(self) -> int:
        return self.bases.shape[1]

    @classmethod
    def placeholder(cls, K: int, d: int) -> "KernelBank":
        """Axis-aligned bank used before fitting (and as the degenerate fallback)."""
        if K > d:
            raise ValueError(f"K={K} exceeds feature dimension d={d}")
        return cls(np.eye(d, dtype=np.float32)[:K])


def init_kernels(sample_windows, K: int, tol: float = 1e-10) -> KernelBank:
    """Fit ``K`` bases as the leading principal directions of window-centred rows.

    Parameters
    ----------
    sample_windows : array_like, shape (n, w, d)
        Windows drawn from the sequences to decompose. Each window is
        mean-centred before the rows are stacked.
    K : int
        Number of bases; must not exceed ``d`` or ``n``.
    tol : float
        Eigenvalues below ``tol * largest`` count as degenerate; those
        directions fall back to axis-aligned unit vectors.
    """
    data = sample_windows.data if isinstance(sample_windows, Tensor) else np.asarray(sample_windows)
    if data.ndim != 3:
        raise ValueError("sample windows must have shape (n, w, d)")
    n, _, d = data.shape
    if K > d:
        raise ValueError(f"K={K} exceeds feature dimension d={d}")
    if n < K:
        raise ValueError(f"need at least K={K} windows, got {n}")
    rows = (data - data.mean(axis=1, keepdims=True)).reshape(-1, d).astype(np.float64)
    cov = rows.T @ rows / max(len(rows), 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = np.clip(evals[order], 0.0, None), evecs[:, order]
    total = evals.sum()
    bases = np.zeros((K, d))
    for k in range(K):
        if total > 0 and evals[k] > tol * evals[0]:
            v = evecs[:, k]
            pivot = np.argmax(np.abs(v))
            bases[k] = v * np.sign(v[pivot])
        else:
            bases[k] = np.eye(d)[k]
    ratio = evals[:K] / total if total > 0 else np.zeros(K)
    return KernelBank(bases / np.linalg.norm(bases, axis=1, keepdims=True), ratio)


def window_count(T: int, w: int, s: int) -> int:
    """Number of full windows ``floor((T - w) / s) + 1``."""
    if w > T:
        raise ValueError(f"window {w} longer than sequence {T}")
    if s < 1:
        raise ValueError("stride must be >= 1")
    return (T - w) // s + 1


def window_starts(T: int, w: int, s: int) -> np.ndarray:
    """Window start offsets, with one extra window ending at ``T - 1`` if the tail is uncovered."""
    if s > w:
        raise ValueError(f"stride {s} larger than window {w} leaves uncovered gaps")
    starts = np.arange(window_count(T, w, s)) * s
    if starts[-1] + w < T:
        starts = np.append(starts, T - w)
    return starts


def coverage_counts(T: int, w: int, s: int) -> np.ndarray:
    counts = np.zeros(T, dtype=np.int64)
    for st in window_starts(T, w, s):
        counts[st : st + w] += 1
    return counts


def _rowdot(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``sum(a * b, axis=-1, keepdims=True)`` (or of ``a`` alone) via a matrix-vector product."""
    prod = a if b is None else a * b
    n = a.shape[-1]
    return (prod.reshape(-1, n) @ np.ones(n, dtype=a.dtype)).reshape(*a.shape[:-1], 1)


def _overlap_add(local: np.ndarray, starts: np.ndarray, n_regular: int, s: int, T: int) -> np.ndarray:
    """Sum per-window rows ``local [N, n, w, d]`` back onto a ``[N, T, d]`` timeline."""
    N, _, w, d = local.shape
    total = np.zeros((N, T, d), dtype=local.dtype)
    span = s * (n_regular - 1) + 1
    for j in range(w):
        total[:, j : j + span : s] += local[:, :n_regular, j]
    if len(starts) > n_regular:
        total[:, starts[-1] : starts[-1] + w] += local[:, -1]
    return total


@dataclass
class Decomposition:
    trend: Tensor
    seasonal: Tensor
    source: Tensor
    weights: np.ndarray | None = None  # softmax weights, shape (..., n_windows, w, K)
    counts: np.ndarray | None = None


def decompose(
    F: Tensor, bank: KernelBank, w: int = 27, s: int = 1, zero_tol: float = 1e-6, return_weights: bool = False
) -> Decomposition:
    """Split ``F`` [..., T, d] into trend and seasonal parts with ``F = S + R``.

    A centred row whose norm is below ``zero_tol * (1 + |window mean|)`` has no
    defined cosine similarity; it contributes the window mean alone, so a
    constant sequence decomposes into ``R = F`` and ``S = 0``.
    """
    T, d = F.shape[-2], F.shape[-1]
    if d != bank.d:
        raise ValueError(f"feature dim {d} does not match kernel bank dim {bank.d}")
    starts = window_starts(T, w, s)
    n_regular = window_count(T, w, s)
    idx = starts[:, None] + np.arange(w)
    counts = np.zeros(T, dtype=np.int64)
    np.add.at(counts, idx.reshape(-1), 1)

    lead = F.shape[:-2]
    x = F.data.reshape(-1, T, d)
    dtype = x.dtype
    K = bank.K
    basis = bank.bases.data.astype(dtype)
    unit = basis / np.linalg.norm(basis, axis=1, keepdims=True)

    xc = x[:, idx, :]  # (N, n, w, d), a fresh copy centred in place below
    mu = np.mean(xc, axis=-2, keepdims=True, dtype=np.float64).astype(dtype)
    xc -= mu
    norm = np.sqrt(_rowdot(xc, xc))
    thresh = zero_tol * (1.0 + np.sqrt(_rowdot(mu, mu)))
    live = (norm > thresh).astype(dtype)
    inv_norm = live / np.where(live > 0, norm, 1.0)
    u = xc * inv_norm
    rows = u.shape[:-1]
    beta = (u.reshape(-1, d) @ unit.T).reshape(*rows, K)
    # cosine similarities lie in [-1, 1], so exp needs no max shift
    np.exp(beta, out=beta)
    beta /= _rowdot(beta)
    local = (beta.reshape(-1, K) @ basis).reshape(*rows, d)
    local *= live
    local += mu

    inv_counts = (1.0 / counts).astype(dtype)[:, None]
    trend = _overlap_add(local, starts, n_regular, s, T)
    trend *= inv_counts

    def bw(g):
        gl = g.reshape(-1, T, d) * inv_counts
        glocal = gl[:, idx, :]
        gmu = glocal.sum(axis=-2, keepdims=True)
        gbeta = (glocal.reshape(-1, d) @ basis.T).reshape(*rows, K)
        gbeta *= live
        galpha = beta * (gbeta - _rowdot(gbeta, beta))
        gu = (galpha.reshape(-1, K) @ unit).reshape(*rows, d)
        gxc = (gu - u * _rowdot(u, gu)) * inv_norm
        gmu -= gxc.sum(axis=-2, keepdims=True)
        gxc += gmu / w
        return (_overlap_add(gxc, starts, n_regular, s, T).reshape(g.shape).astype(dtype),)

    trend = trend.reshape(*lead, T, d)
    R = Tensor._from_op(trend.astype(dtype, copy=False), (F,), bw)
    S = F - R
    weights = beta.reshape(*lead, *beta.shape[1:]) if return_weights else None
    return Decomposition(R, S, F, weights, counts)

