"""Learnable band-pass front-ends over raw waveforms, complex layers, and a
minimal reverse-mode tape to train filter cutoffs jointly with a classifier."""

from .autodiff import (
    CTensor,
    Tape,
    complex_conv1d,
    complex_elementwise_mul,
    ctensor,
    finite_difference_grad,
)
from .errors import (
    BuildError,
    ContractError,
    DimensionError,
    GaborwaveError,
    NumericError,
    ParameterError,
)

__all__ = [
    "CTensor",
    "Tape",
    "ctensor",
    "complex_conv1d",
    "complex_elementwise_mul",
    "finite_difference_grad",
    "GaborwaveError",
    "DimensionError",
    "ParameterError",
    "ContractError",
    "NumericError",
    "BuildError",
]
