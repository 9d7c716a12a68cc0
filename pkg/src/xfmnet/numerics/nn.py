"""Minimal module system: parameter discovery, train/eval mode, dtype casting."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor


def _walk(name: str, value) -> Iterator[tuple[str, object]]:
    """Tensors and modules inside arbitrarily nested lists, tuples and dicts."""
    if isinstance(value, (Tensor, Module)):
        yield name, value
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)
    elif isinstance(value, dict):
        for sub, item in value.items():
            yield from _walk(f"{name}.{sub}", item)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float32), requires_grad=True, name=name)


class Module:
    """Base class. Tensor attributes are state; those with ``requires_grad`` are parameters."""

    training: bool = True

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if not key.startswith("_"):
                yield from _walk(key, value)

    def named_tensors(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                yield name, value
            else:
                yield from value.named_tensors(name + ".")

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for name, t in self.named_tensors():
            if t.requires_grad:
                yield name, t

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        for _, t in self.named_tensors():
            t.data = t.data.astype(dtype)
        return self

    def zero_(self) -> "Module":
        """Set every trainable parameter to zero in place."""
        for p in self.parameters():
            p.data[...] = 0
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.named_tensors()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_tensors())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch; missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, t in own.items():
            arr = np.asarray(state[name])
            if arr.shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.shape}")
            t.data = arr.astype(t.dtype, copy=True)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Linear(Module):
    """``y = x @ W + b`` over the last axis."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True):
        self.d_in, self.d_out = d_in, d_out
        self.weight = parameter(glorot(rng, d_in, d_out, (d_in, d_out)))
        self.bias = parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ValueError(f"Linear expected last dim {self.d_in}, got {x.shape[-1]}")
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class FeedForward(Module):
    """Two linear layers with a ReLU in between."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_hidden: int, d_out: int):
        self.fc1 = Linear(rng, d_in, d_hidden)
        self.fc2 = Linear(rng, d_hidden, d_out)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).relu())
