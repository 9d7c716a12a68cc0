"""Dense tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Every operation on tensors that
require gradients records its parents and a closure computing the
vector-Jacobian product, and :meth:`Tensor.backward` walks the recorded
graph in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_grad_enabled = True
_check_finite = True


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


class GraphError(RuntimeError):
    """Raised for malformed computation graphs."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def finite_checks(enabled: bool):
    """Toggle the per-operation NaN/Inf check inside the block."""
    global _check_finite
    prev = _check_finite
    _check_finite = enabled
    try:
        yield
    finally:
        _check_finite = prev


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    return arr


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An n-dimensional real array that can take part in differentiation.

    Parameters
    ----------
    data : array_like
        Values. Floating arrays keep their dtype; anything else becomes float32.
    requires_grad : bool
        Whether gradients should be accumulated into ``grad`` on backward.
    name : str, optional
        Label used in error messages and checkpoints.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        if _check_finite and not np.isfinite(data).all():
            raise NonFiniteError("operation produced non-finite values")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        needs = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        if needs:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- backward -------------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise GraphError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            raise GraphError("output does not depend on any tensor that requires grad")

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            if len(parent_grads) != len(node._parents):
                raise GraphError("backward closure returned the wrong number of gradients")
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise GraphError(f"gradient shape {pg.shape} does not match {parent.shape}")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = _wrap(other, self.dtype)
        a, b = self, other

        def bw(g):
            return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

        return Tensor._from_op(a.data + b.data, (a, b), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = _wrap(other, self.dtype)
        a, b = self, other

        def bw(g):
            return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

        return Tensor._from_op(a.data - b.data, (a, b), bw)

    def __rsub__(self, other):
        return _wrap(other, self.dtype) - self

    def __mul__(self, other):
        other = _wrap(other, self.dtype)
        a, b = self, other

        def bw(g):
            return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

        return Tensor._from_op(a.data * b.data, (a, b), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other, self.dtype)
        a, b = self, other

        def bw(g):
            return (
                unbroadcast(g / b.data, a.shape),
                unbroadcast(-g * a.data / (b.data * b.data), b.shape),
            )

        return Tensor._from_op(a.data / b.data, (a, b), bw)

    def __rtruediv__(self, other):
        return _wrap(other, self.dtype) / self

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: float):
        if isinstance(exponent, Tensor):
            raise TypeError("only scalar exponents are supported")
        x = self

        def bw(g):
            return (g * exponent * x.data ** (exponent - 1),)

        return Tensor._from_op(x.data**exponent, (x,), bw)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(_wrap(other, self.dtype), self)

    def __getitem__(self, index):
        x = self
        if isinstance(index, Tensor):
            index = index.data
        out = x.data[index]

        def bw(g):
            full = np.zeros_like(x.data)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._from_op(np.array(out, copy=True), (x,), bw)

    # -- elementwise functions ------------------------------------------------
    def exp(self):
        out = np.exp(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self
        return Tensor._from_op(np.log(x.data), (x,), lambda g: (g / x.data,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * 0.5 / out,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self):
        mask = self.data > 0
        return Tensor._from_op(self.data * mask, (self,), lambda g: (g * mask,))

    def abs(self):
        sign = np.sign(self.data)
        return Tensor._from_op(np.abs(self.data), (self,), lambda g: (g * sign,))

    # -- reductions -----------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        x = self
        # full reductions (losses) accumulate in float64; axis sums keep the input dtype
        acc = np.float64 if axis is None else None
        out = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=acc).astype(x.dtype, copy=False)

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=True),)

        return Tensor._from_op(np.asarray(out), (x,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            n = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ----------------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        return Tensor._from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        return Tensor._from_op(
            np.ascontiguousarray(self.data.transpose(axes)), (self,), lambda g: (g.transpose(inv),)
        )

    def swapaxes(self, a: int, b: int):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return self.transpose(tuple(axes))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def tensor(data, requires_grad: bool = False, dtype=np.float32, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=dtype), requires_grad=requires_grad, name=name)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    if b.ndim == 2 and a.ndim > 2:
        # fold the leading axes into one GEMM instead of a loop of small products
        d_in, d_out = b.shape
        a2 = a.data.reshape(-1, d_in)

        def bw_flat(g):
            g2 = g.reshape(-1, d_out)
            return (g2 @ b.data.T).reshape(a.shape), a2.T @ g2

        return Tensor._from_op((a2 @ b.data).reshape(*a.shape[:-1], d_out), (a, b), bw_flat)

    def bw(g):
        ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return Tensor._from_op(a.data @ b.data, (a, b), bw)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, i = stack.pop()
        key = id(node)
        if i == 0:
            if state.get(key) == 2:
                continue
            if state.get(key) == 1:
                raise GraphError("cycle detected in computation graph")
            state[key] = 1
        if i < len(node._parents):
            stack.append((node, i + 1))
            parent = node._parents[i]
            if parent.requires_grad:
                pstate = state.get(id(parent))
                if pstate == 1:
                    raise GraphError("cycle detected in computation graph")
                if pstate is None:
                    stack.append((parent, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def leaves(root: Tensor) -> Iterable[Tensor]:
    """Leaf tensors requiring grad that ``root`` depends on."""
    return [n for n in _topological_order(root) if n._backward is None and n.requires_grad]
