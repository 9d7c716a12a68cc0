"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-4, entries=None) -> np.ndarray:
    grad = np.full(t.shape, np.nan)
    flat = t.data.reshape(-1)
    gflat = grad.reshape(-1)
    idx = range(flat.size) if entries is None else entries
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        up = float(fn().data)
        flat[i] = orig - eps
        down = float(fn().data)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def check_gradients(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor] | dict[str, Tensor],
    eps: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Compare backward gradients with central differences for each tensor.

    ``fn`` must rebuild the scalar loss from scratch on every call. All tensors
    should be float64. Returns the max-norm relative error per tensor:
    ``max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-12)``,
    evaluated on all entries or on ``max_entries`` randomly chosen ones.
    """
    named = tensors if isinstance(tensors, dict) else {str(i): t for i, t in enumerate(tensors)}
    for t in named.values():
        if t.dtype != np.float64:
            raise TypeError("gradient checks need float64 tensors")
        t.grad = None
    loss = fn()
    loss.backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros(t.shape)) for k, t in named.items()}

    rng = np.random.default_rng(seed)
    errors = {}
    for k, t in named.items():
        entries = None
        if max_entries is not None and t.size > max_entries:
            entries = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        num = numerical_grad(fn, t, eps, entries)
        ana = analytic[k]
        sel = np.ones(t.size, dtype=bool) if entries is None else np.isin(np.arange(t.size), entries)
        a = ana.reshape(-1)[sel]
        n = num.reshape(-1)[sel]
        scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-12)
        errors[k] = float(np.abs(a - n).max(initial=0.0) / scale)
    return errors
