"""Analytic parameter and training-memory accounting.

Training memory for a continuous-kernel layer is dominated by the MLP
activations that must be held for the backward pass. The estimate here
is positions_per_unit x per-position activation footprint + a constant
term, where positions_per_unit is the largest block of kernel positions
whose gradients must be differentiated together: parameterizations that
share an MLP across more axes can free less, and sparse selection caps
the block at the number of selected positions. Estimates are analytic
on purpose; measured GPU numbers would not be portable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kernelgen import (
    Parameterization,
    count_discrete_fourier,
    count_discrete_spatial,
    count_mlps,
    count_parameters,
    mlp_parameter_count,
)
from .training import HEAD_WIDTHS

__all__ = [
    "MemoryEstimate",
    "positions_per_unit",
    "estimate_memory",
    "layer_parameter_rows",
    "head_parameter_count",
    "model_parameter_total",
]

_ALL_VARIANTS = (
    Parameterization.HW,
    Parameterization.HW_CIN,
    Parameterization.HW_COUT,
    Parameterization.HW_CIN_COUT,
)


@dataclass(frozen=True)
class MemoryEstimate:
    """Peak-memory model for one parameterization in one execution mode."""

    parameterization: str
    mode: str  # "naive" or "sparse(S)"
    positions_per_unit: int
    mlp_count: int
    bytes_peak: int


def positions_per_unit(parameterization, h, w, c_in, c_out):
    """Largest independently-differentiated block of kernel positions."""
    variant = Parameterization(parameterization)
    return {
        Parameterization.HW: h * w,
        Parameterization.HW_CIN: h * w * c_in,
        Parameterization.HW_COUT: h * w * c_out,
        Parameterization.HW_CIN_COUT: h * w * c_in * c_out,
    }[variant]


def estimate_memory(h, w, c_in, c_out, widths, float_bytes=4, sparse_s=None):
    """MemoryEstimate rows for every parameterization, sorted ascending.

    One shared widths list is used across rows so the comparison isolates
    the position-block mechanism; the constant term is the stateful split
    kernel, which every variant stores identically.
    """
    footprint = sum(widths) * float_bytes
    constant = h * w * c_in * c_out * 2 * float_bytes
    rows = []
    for variant in _ALL_VARIANTS:
        naive = positions_per_unit(variant, h, w, c_in, c_out)
        rows.append(
            MemoryEstimate(
                variant.value, "naive", naive,
                count_mlps(variant, c_in, c_out),
                naive * footprint + constant,
            )
        )
        if sparse_s is not None:
            capped = min(int(sparse_s), naive)
            rows.append(
                MemoryEstimate(
                    variant.value, f"sparse({sparse_s})", capped,
                    count_mlps(variant, c_in, c_out),
                    capped * footprint + constant,
                )
            )
    rows.sort(key=lambda r: (r.bytes_peak, r.parameterization, r.mode))
    return rows


def head_parameter_count(filters):
    """Dense 128/64/1 head on top of the per-channel pooled features."""
    total = 0
    fan_in = filters
    for width in (*HEAD_WIDTHS, 1):
        total += fan_in * width + width
        fan_in = width
    return total


def layer_parameter_rows(config):
    """(name, mlp_count, parameter_count) per conv layer plus the head."""
    rows = []
    c_prev = config.input_channels
    for i in range(config.layer_count):
        if config.baseline:
            rows.append(
                (f"conv{i}", 0, count_discrete_spatial(3, 3, c_prev, config.filters_per_layer))
            )
        else:
            rows.append(
                (
                    f"conv{i}",
                    count_mlps(config.parameterization, c_prev, config.filters_per_layer),
                    count_parameters(
                        config.parameterization, c_prev, config.filters_per_layer,
                        config.mlp_widths,
                    ),
                )
            )
        c_prev = config.filters_per_layer
    rows.append(("head", 0, head_parameter_count(config.filters_per_layer)))
    return rows


def model_parameter_total(config):
    return sum(count for _, _, count in layer_parameter_rows(config))
