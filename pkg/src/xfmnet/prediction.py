"""Per-level forecast heads, cross-level averaging and error metrics."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .numerics import Linear, Module, Tensor, stack


class ForecastHead(Module):
    """``Reg`` maps time ``T_l -> tau``; ``Proj`` maps channels ``d -> M``."""

    def __init__(self, rng: np.random.Generator, t_in: int, horizon: int, d: int, n_stations: int):
        self.reg = Linear(rng, t_in, horizon)
        self.proj = Linear(rng, d, n_stations)

    def __call__(self, z: Tensor) -> Tensor:
        """``z [..., T_l, d] -> [..., M, tau]``."""
        y_reg = self.reg(z.swapaxes(-1, -2)).swapaxes(-1, -2)  # (..., tau, d)
        return self.proj(y_reg).swapaxes(-1, -2)


def predict(z_hats: Sequence[Tensor], heads: Sequence[ForecastHead]) -> Tensor:
    """Average of every level's head output; one ``Z_hat`` per head is required."""
    if len(z_hats) != len(heads):
        raise ValueError(f"expected {len(heads)} level outputs, got {len(z_hats)}")
    if not heads:
        raise ValueError("at least one level is required")
    outs = [head(z) for head, z in zip(heads, z_hats)]
    return stack(outs, axis=0).mean(axis=0)


def _errors(pred, target) -> np.ndarray:
    # row-major copies fix the reduction order regardless of the callers' memory layout
    pred = np.ascontiguousarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    target = np.ascontiguousarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"metric shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("metrics are undefined for empty inputs")
    return pred - target


def mse(pred, target) -> float:
    e = _errors(pred, target)
    return float(np.mean(e * e))


def mae(pred, target) -> float:
    return float(np.mean(np.abs(_errors(pred, target))))
