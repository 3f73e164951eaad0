"""Coordinate MLPs that generate Fourier kernel values, and their accounting.

A kernel position is the 4-tuple (h, w, c_in, c_out). A parameterization
picks which of those axes the generating MLP is conditioned on; the axes
it is not conditioned on are covered by instantiating one MLP per index
combination. Every parameterization doubles its MLP count to produce
separate real and imaginary kernel planes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Parameterization",
    "KernelMLP",
    "SelectionSet",
    "MultiplicityError",
    "normalize_coords",
    "normalize_positions",
    "mlp_forward",
    "sample_positions",
    "generate_kernel_values",
    "count_parameters",
    "count_mlps",
    "mlp_parameter_count",
    "count_discrete_fourier",
    "count_discrete_spatial",
    "DEFAULT_DEEP_WIDTHS",
    "DEFAULT_PAIRWISE_WIDTHS",
]

DEFAULT_DEEP_WIDTHS = (32, 32, 32, 16, 16, 16, 8, 8, 8, 1)
DEFAULT_PAIRWISE_WIDTHS = (2, 1)

DEFAULT_GENERATION_CHUNK = 2 ** 15


class MultiplicityError(ValueError):
    """MLP count does not match what the parameterization requires."""


class Parameterization(str, enum.Enum):
    """Which kernel axes condition the generating MLP."""

    HW = "hw"
    HW_CIN = "hw-cin"
    HW_COUT = "hw-cout"
    HW_CIN_COUT = "hw-cin-cout"

    @property
    def input_arity(self):
        return {"hw": 2, "hw-cin": 3, "hw-cout": 3, "hw-cin-cout": 4}[self.value]

    @property
    def coordinate_axes(self):
        return {
            "hw": (0, 1),
            "hw-cin": (0, 1, 2),
            "hw-cout": (0, 1, 3),
            "hw-cin-cout": (0, 1, 2, 3),
        }[self.value]

    def mlp_pairs(self, c_in, c_out):
        """Number of (real, imag) MLP pairs needed for one layer."""
        return {
            "hw": c_in * c_out,
            "hw-cin": c_out,
            "hw-cout": c_in,
            "hw-cin-cout": 1,
        }[self.value]

    def pair_index(self, positions, c_in, c_out):
        """Which MLP pair serves each of the given positions."""
        positions = np.asarray(positions)
        if self is Parameterization.HW:
            return positions[:, 2] * c_out + positions[:, 3]
        if self is Parameterization.HW_CIN:
            return positions[:, 3]
        if self is Parameterization.HW_COUT:
            return positions[:, 2]
        return np.zeros(len(positions), dtype=np.int64)

    @property
    def default_widths(self):
        if self is Parameterization.HW:
            return DEFAULT_PAIRWISE_WIDTHS
        return DEFAULT_DEEP_WIDTHS


def count_mlps(parameterization, c_in, c_out):
    """MLPs per layer, including the x2 for split real/imag kernels."""
    return Parameterization(parameterization).mlp_pairs(c_in, c_out) * 2


def mlp_parameter_count(input_dim, widths):
    """Weights plus biases of an affine chain input_dim -> widths[0] -> ..."""
    total = 0
    fan_in = input_dim
    for fan_out in widths:
        total += fan_in * fan_out + fan_out
        fan_in = fan_out
    return total


def count_parameters(parameterization, c_in, c_out, widths):
    """Trainable parameters of one continuous-kernel layer."""
    variant = Parameterization(parameterization)
    per_mlp = mlp_parameter_count(variant.input_arity, widths)
    return count_mlps(variant, c_in, c_out) * per_mlp


def count_discrete_fourier(h, w, c_in, c_out):
    """Free parameters of a dense complex Fourier kernel (x2 for re/im)."""
    return h * w * c_in * c_out * 2


def count_discrete_spatial(kh, kw, c_in, c_out):
    """Free parameters of a dense spatial kernel (no bias)."""
    return kh * kw * c_in * c_out


# ---------------------------------------------------------------------------
# coordinate handling and sampling
# ---------------------------------------------------------------------------


def _axis_coord(index, extent):
    if extent == 1:
        return np.zeros_like(np.asarray(index, dtype=np.float64))
    return 2.0 * np.asarray(index, dtype=np.float64) / (extent - 1) - 1.0


def normalize_coords(index, dims, parameterization):
    """Map one in-bounds position to the MLP input cube [-1, 1]^d."""
    variant = Parameterization(parameterization)
    for axis, (i, n) in enumerate(zip(index, dims)):
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of bounds for axis {axis} (extent {n})")
    return np.array(
        [_axis_coord(index[a], dims[a]) for a in variant.coordinate_axes]
    )


def normalize_positions(positions, dims, parameterization):
    """Vectorized normalize_coords for an [S, 4] position array."""
    variant = Parameterization(parameterization)
    positions = np.asarray(positions)
    cols = [_axis_coord(positions[:, a], dims[a]) for a in variant.coordinate_axes]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class SelectionSet:
    """Kernel positions picked for one training step, plus their seed."""

    positions: np.ndarray  # [S, 4] int64
    seed: int | None = None

    def __len__(self):
        return len(self.positions)

    def flat_indices(self, dims):
        return np.ravel_multi_index(
            tuple(self.positions[:, a] for a in range(4)), dims
        )


def sample_positions(dims, count, rng):
    """Uniform selection of ``count`` distinct positions from the kernel grid.

    ``rng`` may be a seed or a Generator; with a seed the draw is
    reproducible and the seed is kept on the SelectionSet. Requests
    larger than the grid return every position.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = rng
        rng = np.random.default_rng(rng)
    total = math.prod(dims)
    take = min(int(count), total)
    flat = rng.choice(total, size=take, replace=False)
    positions = np.stack(np.unravel_index(flat, dims), axis=1).astype(np.int64)
    return SelectionSet(positions, seed)


# ---------------------------------------------------------------------------
# the MLPs themselves
# ---------------------------------------------------------------------------


@dataclass
class KernelMLP:
    """Plain affine/ReLU chain ending in one linear output unit."""

    input_dim: int
    widths: tuple
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @classmethod
    def create(cls, input_dim, widths, rng):
        widths = tuple(int(w) for w in widths)
        if widths[-1] != 1:
            raise ValueError(f"final layer width must be 1, got {widths[-1]}")
        weights = []
        biases = []
        fan_in = input_dim
        for fan_out in widths:
            bound = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
            fan_in = fan_out
        return cls(input_dim, widths, weights, biases)

    @property
    def parameter_count(self):
        return mlp_parameter_count(self.input_dim, self.widths)

    def forward(self, coords):
        """Evaluate the chain on an [N, input_dim] batch; returns [N].

        The affine maps accumulate rank-1 terms in a fixed order rather
        than calling a BLAS matmul, so each row's result is bit-identical
        no matter how positions are batched (chunked generation must be
        value-identical to monolithic generation).
        """
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != self.input_dim:
            raise ValueError(
                f"expected coords of shape [N, {self.input_dim}], got {coords.shape}"
            )
        h = coords
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = np.broadcast_to(b, (h.shape[0], b.shape[0])).copy()
            for d in range(w.shape[0]):
                out += h[:, d, None] * w[d]
            h = out if i == last else np.maximum(out, 0.0)
        return h[:, 0]


def mlp_forward(mlp, coords):
    """Batched evaluation of a kernel MLP (one scalar per coordinate row)."""
    return mlp.forward(coords)


def generate_kernel_values(
    parameterization,
    mlps_re,
    mlps_im,
    dims,
    positions=None,
    chunk_size=DEFAULT_GENERATION_CHUNK,
):
    """Evaluate the split-kernel MLPs at positions (default: the full grid).

    Work proceeds in fixed-size chunks so peak memory stays bounded no
    matter how large the kernel grid is; results are identical for any
    chunk size. Returns (real values, imag values) aligned with the
    position order.
    """
    variant = Parameterization(parameterization)
    h, w, c_in, c_out = dims
    pairs = variant.mlp_pairs(c_in, c_out)
    if len(mlps_re) != pairs or len(mlps_im) != pairs:
        raise MultiplicityError(
            f"{variant.value} needs {pairs} (real, imag) MLP pairs, "
            f"got {len(mlps_re)}/{len(mlps_im)}"
        )
    if positions is None:
        total = math.prod(dims)
        positions = np.stack(np.unravel_index(np.arange(total), dims), axis=1)
    else:
        positions = np.asarray(positions)
    n = len(positions)
    re_vals = np.empty(n)
    im_vals = np.empty(n)
    for start in range(0, n, chunk_size):
        chunk = positions[start:start + chunk_size]
        coords = normalize_positions(chunk, dims, variant)
        groups = variant.pair_index(chunk, c_in, c_out)
        for g in np.unique(groups):
            mask = groups == g
            re_vals[start:start + len(chunk)][mask] = mlps_re[g].forward(coords[mask])
            im_vals[start:start + len(chunk)][mask] = mlps_im[g].forward(coords[mask])
    return re_vals, im_vals
