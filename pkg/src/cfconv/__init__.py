"""Continuous Fourier convolutions with sparse, EMA-stateful kernel updates."""

from .autodiff import Tape, check_gradients
from .kernelgen import (
    KernelMLP,
    Parameterization,
    SelectionSet,
    count_mlps,
    count_parameters,
    generate_kernel_values,
    sample_positions,
)
from .layers import CFConvLayer, SplitKernelState, init_state, spatial_conv3x3_forward
from .numerics import (
    ComplexGrid,
    RealGrid,
    complex_mul_accumulate,
    fft_1d,
    fft_2d,
    ifft_2d_real,
)
from .training import Adam, ModelConfig, adam_update, build_model, evaluate, train_step

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "check_gradients",
    "KernelMLP",
    "Parameterization",
    "SelectionSet",
    "count_mlps",
    "count_parameters",
    "generate_kernel_values",
    "sample_positions",
    "CFConvLayer",
    "SplitKernelState",
    "init_state",
    "spatial_conv3x3_forward",
    "ComplexGrid",
    "RealGrid",
    "complex_mul_accumulate",
    "fft_1d",
    "fft_2d",
    "ifft_2d_real",
    "Adam",
    "ModelConfig",
    "adam_update",
    "build_model",
    "evaluate",
    "train_step",
]
