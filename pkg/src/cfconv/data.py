"""Packed image dataset format, batching, and the synthetic desk-scale task.

File layout (all integers little-endian): magic "CFDS", u32 version=1,
u32 record count, u16 height, u16 width, u8 channels, then per record
one u8 label followed by H*W*C pixel bytes, row-major with channels
interleaved.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .numerics import fft2, ifft2_real, radial_band_masks, radial_frequencies

__all__ = [
    "DatasetFormatError",
    "Batch",
    "write_dataset",
    "read_dataset",
    "load_dataset",
    "make_batches",
    "make_synthetic_dataset",
    "band_energies",
]

MAGIC = b"CFDS"
VERSION = 1
_HEADER = struct.Struct("<4sIIHHB")


class DatasetFormatError(ValueError):
    """The dataset file violates the packed format."""


@dataclass
class Batch:
    """One minibatch: images scaled to [0, 1] and binary labels."""

    images: np.ndarray  # [B, H, W, C] float64
    labels: np.ndarray  # [B] float64 in {0, 1}

    def __post_init__(self):
        if self.images.min() < 0.0 or self.images.max() > 1.0:
            raise ValueError("batch pixels must lie in [0, 1]")
        if not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise ValueError("batch labels must be 0 or 1")

    def __len__(self):
        return len(self.labels)


def write_dataset(path, images, labels):
    """Write u8 images [N, H, W, C] and labels [N] to the packed format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, h, w, c = images.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, h, w, c))
        for i in range(n):
            fh.write(bytes([int(labels[i])]))
            fh.write(images[i].tobytes())


def read_dataset(path):
    """Read a packed dataset; every violation names the offending record."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DatasetFormatError(f"{path}: malformed header (file too short)")
    magic, version, count, h, w, c = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    rec = 1 + h * w * c
    if len(blob) != _HEADER.size + count * rec:
        # point at the first incomplete record
        complete = (len(blob) - _HEADER.size) // rec
        raise DatasetFormatError(
            f"{path}: truncated record {min(complete, count - 1)} "
            f"(expected {count} records of {rec} bytes)"
        )
    images = np.empty((count, h, w, c), dtype=np.uint8)
    labels = np.empty(count, dtype=np.uint8)
    off = _HEADER.size
    for i in range(count):
        label = blob[off]
        if label not in (0, 1):
            raise DatasetFormatError(f"{path}: record {i} has label {label} outside {{0,1}}")
        labels[i] = label
        images[i] = np.frombuffer(blob, dtype=np.uint8, count=rec - 1, offset=off + 1).reshape(h, w, c)
        off += rec
    return images, labels


def _shift(img, dy, dx):
    h, w, _ = img.shape
    out = np.zeros_like(img)
    out[max(0, dy):h + min(0, dy), max(0, dx):w + min(0, dx)] = \
        img[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    return out


def _augment(img, rng, shift_px=8):
    if rng.random() < 0.5:
        img = img[:, ::-1, :]
    dy = int(rng.integers(-shift_px, shift_px + 1))
    dx = int(rng.integers(-shift_px, shift_px + 1))
    if dy or dx:
        img = _shift(img, dy, dx)
    return np.ascontiguousarray(img)


def make_batches(images, labels, batch_size, seed=None, shuffle=False, augment=False,
                 shift_px=8):
    """Slice a dataset into Batches; deterministic for a given seed."""
    n = len(labels)
    order = np.arange(n)
    rng = np.random.default_rng(seed)
    if shuffle:
        order = rng.permutation(n)
    batches = []
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        imgs = images[idx].astype(np.float64) / 255.0
        if augment:
            imgs = np.stack([_augment(im, rng, shift_px) for im in imgs])
        batches.append(Batch(imgs, labels[idx].astype(np.float64)))
    return batches


def load_dataset(path, batch_size, seed=None, shuffle=False, augment=False):
    """Read a packed dataset file and slice it into Batches."""
    images, labels = read_dataset(path)
    return make_batches(images, labels, batch_size, seed, shuffle, augment)


# ---------------------------------------------------------------------------
# synthetic frequency-texture task
# ---------------------------------------------------------------------------


def _lowpass_noise(rng, size):
    noise = rng.standard_normal((size, size))
    r = radial_frequencies(size, size)
    mask = r <= r.max() / 4.0
    smooth = ifft2_real(fft2(noise.astype(complex), axes=(0, 1)) * mask, axes=(0, 1))
    return smooth


def _high_band_grating(rng, size):
    r = radial_frequencies(size, size)
    threshold = 2.0 * r.max() / 3.0
    half = size // 2
    while True:
        ky = int(rng.integers(1, half + 1))
        kx = int(rng.integers(1, half + 1))
        if math.hypot(ky / size, kx / size) >= threshold:
            break
    if rng.random() < 0.5:
        kx = -kx
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    return np.sin(2.0 * np.pi * (ky * yy + kx * xx) / size + phase)


def _to_unit(img):
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def make_synthetic_dataset(n, size, rng, path=None):
    """Two frequency-separated texture classes, evenly split.

    Class 0 images are low-pass-filtered noise (smooth blobs); class 1
    images are oriented gratings confined to the high radial band, mixed
    with a little of the same smooth noise so only band energy separates
    the classes. Labels alternate 0, 1, 0, 1, ...
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    images = np.empty((n, size, size, 3), dtype=np.uint8)
    labels = (np.arange(n) % 2).astype(np.uint8)
    for i in range(n):
        blob = _to_unit(_lowpass_noise(rng, size))
        if labels[i]:
            grating = _to_unit(_high_band_grating(rng, size))
            img = _to_unit(0.75 * grating + 0.25 * blob)
        else:
            img = blob
        u8 = np.round(img * 255.0).astype(np.uint8)
        images[i] = u8[:, :, None].repeat(3, axis=2)
    if path is not None:
        write_dataset(path, images, labels)
    return images, labels


def band_energies(image):
    """Mean spectral energy of a 2D image in the low/mid/high radial bands."""
    image = np.asarray(image, dtype=np.float64)
    spec = fft2(image.astype(complex), axes=(0, 1))
    power = np.abs(spec) ** 2
    return tuple(power[m].mean() for m in radial_band_masks(*image.shape))
