"""Spectral transforms and frequency-domain circular cross-correlation.

Transforms run through ``numpy.fft`` (pocketfft, which handles any length
directly via Bluestein's algorithm for awkward sizes) in 64-bit precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class ComplexBuffer:
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        if self.re.shape != self.im.shape or self.re.ndim != 1:
            raise ValueError("re and im must be 1-D arrays of equal length")

    @property
    def length(self) -> int:
        return len(self.re)

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexBuffer":
        z = np.asarray(z, dtype=np.complex128)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))


def fft(x) -> ComplexBuffer:
    """Discrete Fourier transform of a real (or complex) 1-D sequence."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("fft expects a 1-D sequence")
    if x.size == 0:
        raise ValueError("fft of an empty sequence")
    return ComplexBuffer.from_complex(np.fft.fft(x.astype(np.complex128)))


def ifft(spectrum: ComplexBuffer) -> ComplexBuffer:
    if spectrum.length == 0:
        raise ValueError("ifft of an empty spectrum")
    return ComplexBuffer.from_complex(np.fft.ifft(spectrum.to_complex()))


def _xcorr(a: np.ndarray, b: np.ndarray, axis: int) -> np.ndarray:
    # real(F^-1(F(a) * conj(F(b)))) along axis, i.e. out[tau] = sum_t a[t + tau] b[t]
    n = a.shape[axis]
    fa = np.fft.rfft(a.astype(np.float64), axis=axis)
    fb = np.fft.rfft(b.astype(np.float64), axis=axis)
    return np.fft.irfft(fa * np.conj(fb), n=n, axis=axis)


def _cconv(a: np.ndarray, b: np.ndarray, axis: int) -> np.ndarray:
    n = a.shape[axis]
    fa = np.fft.rfft(a.astype(np.float64), axis=axis)
    fb = np.fft.rfft(b.astype(np.float64), axis=axis)
    return np.fft.irfft(fa * fb, n=n, axis=axis)


def freq_cross_correlate(q: Tensor, k: Tensor, axis: int = -2) -> Tensor:
    """Circular cross-correlation of ``q`` and ``k`` computed in the frequency domain.

    Returns ``real(ifft(fft(q) * conj(fft(k))))`` per channel along ``axis``
    (time), so ``out[tau] = sum_t q[(t + tau) mod T] * k[t]``. Inputs of shape
    [..., T, d] are transformed along the time axis independently per channel.
    """
    if q.shape != k.shape:
        raise ValueError(f"freq_cross_correlate shape mismatch: {q.shape} vs {k.shape}")
    dtype = q.dtype
    out = _xcorr(q.data, k.data, axis).astype(dtype)

    def bw(g):
        gq = _cconv(g, k.data, axis).astype(dtype)
        gk = _xcorr(q.data, g, axis).astype(dtype)
        return gq, gk

    return Tensor._from_op(out, (q, k), bw)
