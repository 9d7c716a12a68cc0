"""Bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> AdamState:
    """Apply one Adam update to ``params`` in place and return the advanced state.

    Parameters without an entry in ``grads`` (or with ``None``) keep their
    moments untouched but the shared step counter still advances.
    """
    if state.lr < 0:
        raise ValueError("learning rate must be non-negative")
    for name, g in grads.items():
        if g is not None and not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name!r} {p.shape}")
        g = g.astype(np.float64)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data = (p.data - update).astype(p.dtype)
    return state


class Adam:
    """Convenience wrapper pairing named parameters with an :class:`AdamState`."""

    def __init__(self, named_params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = dict(named_params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        grads = {name: p.grad for name, p in self.params.items() if p.grad is not None}
        adam_step(self.params, grads, self.state)
