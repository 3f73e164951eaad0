"""The continuous Fourier convolution layer and its spatial 3x3 baseline.

A layer owns a persistent split kernel (real and imaginary planes over
the full H x W x C_in x C_out grid) plus the coordinate MLPs that
regenerate kernel values. During a training step only the selected
positions are touched: the forward pass blends stored values toward
fresh MLP outputs there, gradients flow through the MLP outputs alone
(scaled by the blend weight), and commit_update writes the same blended
values back into the state. Unselected positions are never copied,
recomputed, or differentiated.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernelgen
from .kernelgen import KernelMLP, Parameterization, SelectionSet
from .numerics import fft2, ifft2_real, mul_accumulate

__all__ = [
    "SplitKernelState",
    "CFConvLayer",
    "SelectionBoundsError",
    "init_state",
    "spatial_conv3x3_forward",
]


class SelectionBoundsError(IndexError):
    """A selected position lies outside the kernel grid."""


class SplitKernelState:
    """Stateful split kernel: independent real and imaginary planes."""

    def __init__(self, re_plane, im_plane, step_counter=0):
        self.re_plane = re_plane
        self.im_plane = im_plane
        self.step_counter = step_counter

    @property
    def shape(self):
        return self.re_plane.shape

    def copy(self):
        return SplitKernelState(
            self.re_plane.copy(), self.im_plane.copy(), self.step_counter
        )

    def to_complex(self):
        return self.re_plane + 1j * self.im_plane


def init_state(dims, rng):
    """Fresh kernel state, both planes i.i.d. uniform on [-1, 1]."""
    if any(d < 1 for d in dims):
        raise ValueError(f"all kernel extents must be >= 1, got {dims}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    re = rng.uniform(-1.0, 1.0, size=tuple(dims))
    im = rng.uniform(-1.0, 1.0, size=tuple(dims))
    return SplitKernelState(re, im)


class CFConvLayer:
    """One continuous Fourier convolution layer.

    The Fourier kernel always spans the full feature-map extent, so the
    spatial-equivalent kernel size is unconstrained and the per-step
    cost does not depend on it.
    """

    def __init__(self, dims, parameterization, mlp_widths=None, ema_alpha=0.1,
                 rng=None, name="cfconv"):
        if not 0.0 < ema_alpha <= 1.0:
            raise ValueError(f"ema_alpha must be in (0, 1], got {ema_alpha}")
        self.dims = tuple(int(d) for d in dims)
        self.parameterization = Parameterization(parameterization)
        self.widths = tuple(mlp_widths or self.parameterization.default_widths)
        self.ema_alpha = float(ema_alpha)
        self.name = name
        if rng is None:
            rng = np.random.default_rng()
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        h, w, c_in, c_out = self.dims
        self.state = init_state(self.dims, rng)
        pairs = self.parameterization.mlp_pairs(c_in, c_out)
        arity = self.parameterization.input_arity
        self.mlps_re = [KernelMLP.create(arity, self.widths, rng) for _ in range(pairs)]
        self.mlps_im = [KernelMLP.create(arity, self.widths, rng) for _ in range(pairs)]

    # -- parameters ---------------------------------------------------------

    def parameters(self):
        """Trainable arrays keyed by stable ids (state planes excluded)."""
        params = {}
        for tag, mlps in (("re", self.mlps_re), ("im", self.mlps_im)):
            for g, mlp in enumerate(mlps):
                for layer_idx in range(len(mlp.weights)):
                    params[f"{self.name}.{tag}{g}.w{layer_idx}"] = mlp.weights[layer_idx]
                    params[f"{self.name}.{tag}{g}.b{layer_idx}"] = mlp.biases[layer_idx]
        return params

    def parameter_count(self):
        return sum(v.size for v in self.parameters().values())

    # -- tape-facing forward ------------------------------------------------

    def _check_selection(self, selection):
        pos = selection.positions
        if len(pos) == 0:
            return
        for axis in range(4):
            if pos[:, axis].min() < 0 or pos[:, axis].max() >= self.dims[axis]:
                raise SelectionBoundsError(
                    f"selection axis {axis} outside extent {self.dims[axis]}"
                )

    def _mlp_on_tape(self, tape, mlp, tag, group, coords):
        h = tape.constant(coords)
        last = len(mlp.weights) - 1
        for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            wn = tape.leaf(w, param_id=f"{self.name}.{tag}{group}.w{i}")
            bn = tape.leaf(b, param_id=f"{self.name}.{tag}{group}.b{i}")
            h = tape.record("linear", (h, wn, bn))
            if i != last:
                h = tape.record("relu", (h,))
        return h

    def build_effective_kernel(self, tape, selection):
        """Kernel planes for one step: stored state, blended at selection.

        Returns ((re_node, im_node), (phi_re, phi_im)) where the phi
        arrays are the raw MLP outputs aligned with the selection order,
        ready to be committed after the optimizer step.
        """
        self._check_selection(selection)
        k_re = tape.constant(self.state.re_plane)
        k_im = tape.constant(self.state.im_plane)
        n = len(selection)
        phi_re = np.empty(n)
        phi_im = np.empty(n)
        if n == 0:
            return (k_re, k_im), (phi_re, phi_im)
        h, w, c_in, c_out = self.dims
        flat = selection.flat_indices(self.dims)
        coords = kernelgen.normalize_positions(
            selection.positions, self.dims, self.parameterization
        )
        groups = self.parameterization.pair_index(selection.positions, c_in, c_out)
        alpha = self.ema_alpha
        for g in np.unique(groups):
            mask = groups == g
            out_re = self._mlp_on_tape(tape, self.mlps_re[g], "re", g, coords[mask])
            out_im = self._mlp_on_tape(tape, self.mlps_im[g], "im", g, coords[mask])
            phi_re[mask] = out_re.value.ravel()
            phi_im[mask] = out_im.value.ravel()
            k_re = tape.record("scale_and_add", (k_re, out_re),
                               a=1.0 - alpha, b=alpha, indices=flat[mask])
            k_im = tape.record("scale_and_add", (k_im, out_im),
                               a=1.0 - alpha, b=alpha, indices=flat[mask])
        return (k_re, k_im), (phi_re, phi_im)

    def forward(self, tape, x_node, selection):
        """Spectral convolution of a feature map against the blended kernel.

        Input is [B, H, W, C_in] (or [H, W, C_in]); output has C_out
        channels and the same spatial extent. All steps are on the tape.
        """
        x = x_node.value
        batched = x.ndim == 4
        axes = (1, 2) if batched else (0, 1)
        h, w, c_in, _ = self.dims
        got = (x.shape[axes[0]], x.shape[axes[1]], x.shape[axes[1] + 1])
        if got != (h, w, c_in):
            raise ValueError(
                f"input H x W x C_in {got} does not match kernel dims {(h, w, c_in)}"
            )
        (k_re, k_im), phis = self.build_effective_kernel(tape, selection)
        spec = tape.record("fft_2d", (x_node,), axes=axes)
        prod = tape.record("complex_mul_accumulate", (spec, k_re, k_im))
        out = tape.record("ifft_2d_real", (prod,), axes=axes)
        return out, phis

    # -- state management ---------------------------------------------------

    def commit_update(self, selection, phi_re, phi_im):
        """EMA-blend MLP outputs into the stored planes at the selection."""
        self._check_selection(selection)
        if len(selection) != len(phi_re) or len(selection) != len(phi_im):
            raise ValueError(
                f"selection has {len(selection)} positions but got "
                f"{len(phi_re)}/{len(phi_im)} values"
            )
        if len(selection):
            flat = selection.flat_indices(self.dims)
            a = 1.0 - self.ema_alpha
            b = self.ema_alpha
            planes = (self.state.re_plane, self.state.im_plane)
            for plane, phi in zip(planes, (phi_re, phi_im)):
                plane.flat[flat] = a * plane.flat[flat] + b * np.asarray(phi)
        self.state.step_counter += 1

    def inference_kernel(self):
        """Stored kernel as a complex array; no MLP evaluation involved."""
        return self.state.to_complex()

    def materialize_full_kernel(self):
        """Snapshot of the stored planes plus spatial-equivalent filters.

        The spatial equivalent of each (c_in, c_out) pair is the real
        part of the inverse transform of its Fourier plane; its support
        is the layer's effective kernel size.
        """
        snapshot = self.state.copy()
        spatial = ifft2_real(snapshot.to_complex(), axes=(0, 1))
        return snapshot, spatial

    def infer(self, x):
        """Forward pass off the tape using only the stored kernel."""
        batched = x.ndim == 4
        axes = (1, 2) if batched else (0, 1)
        spec = fft2(x, axes=axes)
        return ifft2_real(mul_accumulate(spec, self.inference_kernel()), axes=axes)


def spatial_conv3x3_forward(weights, x):
    """Stride-1 zero-padded 3x3 cross-correlation (the baseline layer).

    ``weights`` is [3, 3, C_in, C_out]; ``x`` is [B, H, W, C_in] or
    [H, W, C_in] with H, W >= 3.
    """
    weights = np.asarray(weights, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if weights.shape[:2] != (3, 3):
        raise ValueError(f"expected a 3x3 kernel, got {weights.shape}")
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.shape[1] < 3 or x.shape[2] < 3:
        raise ValueError(f"input spatial dims must be >= 3, got {x.shape[1:3]}")
    if x.shape[3] != weights.shape[2]:
        raise ValueError(
            f"input channels {x.shape[3]} do not match kernel C_in {weights.shape[2]}"
        )
    h, w = x.shape[1], x.shape[2]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((x.shape[0], h, w, weights.shape[3]))
    for dy in range(3):
        for dx in range(3):
            out += xp[:, dy:dy + h, dx:dx + w, :] @ weights[dy, dx]
    return out[0] if squeeze else out
