"""Kernel export: stored planes, spatial equivalents, spectral centroids."""

from __future__ import annotations

import csv
import os
import struct

import numpy as np

from .numerics import radial_frequencies

__all__ = ["save_tensor", "load_tensor", "spectral_centroids", "export_kernels"]

_TENSOR_MAGIC = b"CFTN"
_TENSOR_VERSION = 1


def save_tensor(path, arr):
    """Dump one float64 array: magic, version, ndim, dims, raw LE data."""
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIB", _TENSOR_MAGIC, _TENSOR_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def load_tensor(path):
    with open(path, "rb") as fh:
        magic, version, ndim = struct.unpack("<4sIB", fh.read(9))
        if magic != _TENSOR_MAGIC or version != _TENSOR_VERSION:
            raise ValueError(f"{path}: not a tensor dump")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape)


def spectral_centroids(kernel):
    """Energy-weighted mean radial frequency per (c_in, c_out) filter.

    ``kernel`` is the complex [H, W, C_in, C_out] Fourier kernel; the
    result is [C_in, C_out] in cycles/sample.
    """
    power = np.abs(kernel) ** 2
    r = radial_frequencies(kernel.shape[0], kernel.shape[1])
    num = np.einsum("hw,hwio->io", r, power)
    den = power.sum(axis=(0, 1))
    return num / np.maximum(den, 1e-300)


def export_kernels(model, out_dir):
    """Write per-layer kernel planes, spatial filters, and a centroid CSV.

    Returns the list of files written. Only CF-Conv layers export;
    baseline conv weights have no stored spectrum.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    csv_path = os.path.join(out_dir, "spectral_centroids.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "c_in", "c_out", "centroid"])
        for layer in model.conv_layers:
            if not hasattr(layer, "state"):
                continue
            snapshot, spatial = layer.materialize_full_kernel()
            for tag, arr in (
                ("state_re", snapshot.re_plane),
                ("state_im", snapshot.im_plane),
                ("spatial", spatial),
            ):
                path = os.path.join(out_dir, f"{layer.name}_{tag}.cftn")
                save_tensor(path, arr)
                written.append(path)
            centroids = spectral_centroids(snapshot.to_complex())
            for i in range(centroids.shape[0]):
                for o in range(centroids.shape[1]):
                    writer.writerow([layer.name, i, o, f"{centroids[i, o]:.8f}"])
    written.append(csv_path)
    return written
