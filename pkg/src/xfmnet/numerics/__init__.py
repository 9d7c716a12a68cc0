"""Tensors, differentiable primitives, FFT, and Adam."""

from .checkpoint import load_checkpoint, save_checkpoint
from .fft import ComplexBuffer, fft, freq_cross_correlate, ifft
from .gradcheck import check_gradients, numerical_grad
from .nn import FeedForward, Linear, Module, parameter
from .ops import (
    avg_pool1d,
    concat,
    conv1d,
    conv2d,
    conv_transpose1d,
    dropout,
    embedding,
    leaky_relu,
    linear,
    mse_loss,
    pad,
    softmax,
    stack,
    where,
)
from .optim import Adam, AdamState, adam_step
from .tensor import GraphError, NonFiniteError, Tensor, finite_checks, matmul, no_grad, tensor

__all__ = [
    "Adam",
    "AdamState",
    "ComplexBuffer",
    "FeedForward",
    "GraphError",
    "Linear",
    "Module",
    "NonFiniteError",
    "Tensor",
    "adam_step",
    "avg_pool1d",
    "check_gradients",
    "concat",
    "conv1d",
    "conv2d",
    "conv_transpose1d",
    "dropout",
    "embedding",
    "fft",
    "finite_checks",
    "freq_cross_correlate",
    "ifft",
    "leaky_relu",
    "linear",
    "load_checkpoint",
    "matmul",
    "mse_loss",
    "no_grad",
    "numerical_grad",
    "pad",
    "parameter",
    "save_checkpoint",
    "softmax",
    "stack",
    "tensor",
    "where",
]
