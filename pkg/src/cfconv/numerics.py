"""Dense real/complex grids and the FFT transforms everything else runs on.

Conventions: forward transforms are plain unnormalized DFT sums and the
inverse carries a 1/N factor per axis. Under this pairing a pointwise
product of forward spectra inverts to the circular convolution of the
original signals with no extra scale factor.

Power-of-two lengths run an iterative radix-2 Cooley-Tukey. Every other
length (primes, 150, ...) runs a Bluestein chirp-z transform built on
padded power-of-two FFTs, so any size N >= 1 is supported exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "EmptyInputError",
    "ShapeMismatchError",
    "ComplexGrid",
    "RealGrid",
    "fft_1d",
    "fft_2d",
    "ifft_2d_real",
    "complex_mul_accumulate",
    "fft_axis",
    "fft2",
    "ifft2_real",
    "mul_accumulate",
    "fft_frequencies",
    "radial_frequencies",
    "radial_band_masks",
]


class EmptyInputError(ValueError):
    """A transform was asked to run over a zero-length axis."""


class ShapeMismatchError(ValueError):
    """Operands disagree on an axis; the message names the axis."""


# ---------------------------------------------------------------------------
# core transforms on plain ndarrays (always along the last axis)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _bit_reversal(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.flags.writeable = False
    return rev


@lru_cache(maxsize=None)
def _twiddles(m, sign):
    half = m // 2
    w = np.exp(sign * 2j * np.pi * np.arange(half) / m)
    w.flags.writeable = False
    return w


def _fft_pow2_first(x2d, sign):
    """Unnormalized radix-2 DFT along axis 0 of a [n, rest] array.

    Butterfly blocks along the leading axis are contiguous row slabs,
    which keeps every stage a full-bandwidth vector operation.
    """
    n = x2d.shape[0]
    y = np.ascontiguousarray(x2d[_bit_reversal(n)], dtype=np.complex128)
    if n == 1:
        return y
    rest = y.shape[1]
    scratch = np.empty((n // 2, rest), dtype=np.complex128)
    m = 2
    while m <= n:
        half = m // 2
        tw = _twiddles(m, sign)[:, None]
        blocks = y.reshape(n // m, m, rest)
        even = blocks[:, :half]
        odd = blocks[:, half:]
        t = scratch.reshape(n // m, half, rest)
        np.multiply(odd, tw, out=t)
        np.subtract(even, t, out=odd)
        np.add(even, t, out=even)
        m *= 2
    return y


@lru_cache(maxsize=None)
def _bluestein_tables(n, sign):
    # chirp is periodic in k**2 modulo 2n, so reduce before the exponential
    m = 1 << (2 * n - 1).bit_length()
    k2 = (np.arange(n, dtype=np.int64) ** 2) % (2 * n)
    chirp = np.exp(sign * 1j * np.pi * k2 / n)
    b = np.zeros((m, 1), dtype=np.complex128)
    b[:n, 0] = np.conj(chirp)
    b[m - n + 1:, 0] = np.conj(chirp[1:])[::-1]
    fb = _fft_pow2_first(b, -1.0)
    chirp.flags.writeable = False
    fb.flags.writeable = False
    return chirp, fb, m


def _bluestein_first(x2d, sign):
    """Arbitrary-length unnormalized DFT along axis 0 (chirp-z transform)."""
    n = x2d.shape[0]
    chirp, fb, m = _bluestein_tables(n, sign)
    a = np.zeros((m, x2d.shape[1]), dtype=np.complex128)
    np.multiply(x2d, chirp[:, None], out=a[:n])
    fa = _fft_pow2_first(a, -1.0)
    conv = _fft_pow2_first(fa * fb, 1.0)[:n]
    conv /= m
    conv *= chirp[:, None]
    return conv


def _dft_first(x2d, sign):
    n = x2d.shape[0]
    if n & (n - 1) == 0:
        return _fft_pow2_first(x2d, sign)
    return _bluestein_first(x2d, sign)


def fft_axis(x, axis=-1, inverse=False):
    """DFT of ``x`` along one axis; forward unnormalized, inverse scaled 1/N."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[axis]
    if n == 0:
        raise EmptyInputError("cannot transform a zero-length axis")
    sign = 1.0 if inverse else -1.0
    moved = np.moveaxis(x, axis, 0)
    out = _dft_first(moved.reshape(n, -1), sign).reshape(moved.shape)
    if inverse:
        out = out / n
    return np.ascontiguousarray(np.moveaxis(out, 0, axis))


def fft2(x, axes=(-2, -1), inverse=False):
    """Separable 2D DFT over the two given axes."""
    x = np.asarray(x, dtype=np.complex128)
    a0 = axes[0] % x.ndim
    a1 = axes[1] % x.ndim
    h = x.shape[a0]
    w = x.shape[a1]
    if h == 0 or w == 0:
        raise EmptyInputError("cannot transform a zero-length axis")
    sign = 1.0 if inverse else -1.0
    moved = np.moveaxis(x, (a0, a1), (0, 1))
    rest = moved.shape[2:]
    out = _dft_first(moved.reshape(h, -1), sign).reshape((h, w) + rest)
    out = np.ascontiguousarray(out.swapaxes(0, 1))
    out = _dft_first(out.reshape(w, -1), sign).reshape((w, h) + rest)
    out = out.swapaxes(0, 1)
    if inverse:
        out = out / (h * w)
    return np.ascontiguousarray(np.moveaxis(out, (0, 1), (a0, a1)))


def ifft2_real(x, axes=(-2, -1)):
    """Inverse 2D DFT, real component only; imaginary residue is dropped."""
    return np.ascontiguousarray(fft2(x, axes=axes, inverse=True).real)


def mul_accumulate(f, k):
    """Pointwise spectrum product summed over input channels.

    ``f`` has shape [..., H, W, C_in] with an optional single leading batch
    axis, ``k`` has shape [H, W, C_in, C_out]; the result replaces the
    C_in axis with C_out.
    """
    f = np.asarray(f)
    k = np.asarray(k)
    if f.ndim == 3:
        return np.einsum("hwi,hwio->hwo", f, k)
    if f.ndim == 4:
        fm = np.moveaxis(f, 0, 2)  # [H, W, B, C_in]
        return np.ascontiguousarray(np.moveaxis(fm @ k, 2, 0))
    raise ShapeMismatchError(f"feature map must be 3D or 4D, got {f.ndim}D")


def fft_frequencies(n):
    """Signed sample frequencies of an n-point DFT, in cycles per sample."""
    k = np.arange(n)
    return ((k + n // 2) % n - n // 2) / n


def radial_frequencies(h, w):
    """Radial frequency magnitude at every (row, col) spectrum position."""
    fy = fft_frequencies(h)[:, None]
    fx = fft_frequencies(w)[None, :]
    return np.sqrt(fy * fy + fx * fx)


def radial_band_masks(h, w):
    """Partition the (h, w) spectrum into low/mid/high radial thirds."""
    r = radial_frequencies(h, w)
    edges = r.max() * np.array([1.0 / 3.0, 2.0 / 3.0])
    low = r < edges[0]
    mid = (r >= edges[0]) & (r < edges[1])
    high = r >= edges[1]
    return low, mid, high


# ---------------------------------------------------------------------------
# grid types
# ---------------------------------------------------------------------------


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class ComplexGrid:
    """Dense complex grid stored as flat real/imag planes plus a shape."""

    shape: tuple
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        size = math.prod(self.shape)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        re = np.ascontiguousarray(self.re, dtype=np.float64).reshape(-1)
        im = np.ascontiguousarray(self.im, dtype=np.float64).reshape(-1)
        if re.size != size or im.size != size:
            raise ShapeMismatchError(
                f"planes of length {re.size}/{im.size} do not match shape {self.shape}"
            )
        _check_finite(re, "real plane")
        _check_finite(im, "imag plane")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, arr):
        arr = np.asarray(arr, dtype=np.complex128)
        return cls(arr.shape, arr.real.copy(), arr.imag.copy())

    def to_complex(self):
        return (self.re + 1j * self.im).reshape(self.shape)


@dataclass(frozen=True)
class RealGrid:
    """Dense real grid stored as a flat array plus a shape."""

    shape: tuple
    data: np.ndarray

    def __post_init__(self):
        size = math.prod(self.shape)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        data = np.ascontiguousarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != size:
            raise ShapeMismatchError(
                f"data of length {data.size} does not match shape {self.shape}"
            )
        _check_finite(data, "data")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr.copy())

    def to_array(self):
        return self.data.reshape(self.shape)


# ---------------------------------------------------------------------------
# grid-level operations
# ---------------------------------------------------------------------------


def fft_1d(signal: ComplexGrid, inverse=False) -> ComplexGrid:
    """DFT of a length-N grid; any N >= 1 (composite or prime)."""
    if len(signal.shape) != 1:
        raise ShapeMismatchError(f"expected a 1D grid, got shape {signal.shape}")
    out = fft_axis(signal.to_complex(), axis=0, inverse=inverse)
    return ComplexGrid.from_complex(out)


def fft_2d(grid: ComplexGrid, inverse=False) -> ComplexGrid:
    """Separable row-then-column DFT of an HxW grid."""
    if len(grid.shape) != 2:
        raise ShapeMismatchError(f"expected a 2D grid, got shape {grid.shape}")
    out = fft2(grid.to_complex(), axes=(0, 1), inverse=inverse)
    return ComplexGrid.from_complex(out)


def ifft_2d_real(spectrum: ComplexGrid) -> RealGrid:
    """Inverse 2D DFT keeping only the real component.

    Split kernels need not produce conjugate-symmetric spectra, so a
    nonzero imaginary residue is expected and silently discarded.
    """
    if len(spectrum.shape) != 2:
        raise ShapeMismatchError(f"expected a 2D grid, got shape {spectrum.shape}")
    out = ifft2_real(spectrum.to_complex(), axes=(0, 1))
    return RealGrid.from_array(out)


def complex_mul_accumulate(f: ComplexGrid, k: ComplexGrid) -> ComplexGrid:
    """Per-position complex product of F[h,w,i] and K[h,w,i,o], summed over i."""
    if len(f.shape) != 3:
        raise ShapeMismatchError(f"F must be H x W x C_in, got shape {f.shape}")
    if len(k.shape) != 4:
        raise ShapeMismatchError(f"K must be H x W x C_in x C_out, got shape {k.shape}")
    for axis, name in ((0, "height (H)"), (1, "width (W)"), (2, "input channels (C_in)")):
        if f.shape[axis] != k.shape[axis]:
            raise ShapeMismatchError(
                f"{name} mismatch: F has {f.shape[axis]}, K has {k.shape[axis]}"
            )
    out = mul_accumulate(f.to_complex(), k.to_complex())
    return ComplexGrid.from_complex(out)
