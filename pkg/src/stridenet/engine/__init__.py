"""Minimal dense-tensor engine with reverse-mode differentiation.

Everything is float32 and deterministic for a fixed seed. The engine grows
exactly the operations needed by the stride autoencoder and its heads:
3x3 same-padding convolution, time-axis max pooling and upsampling, dense
layers, softmax cross-entropy, and the usual elementwise arithmetic.
"""

from .tensor import EngineNumericsError, ShapeError, Tensor, set_finite_checks
from .nn import (
    concat_channels,
    conv2d_same,
    crop_time,
    dense,
    flatten_features,
    maxpool_time,
    mse,
    pad_time,
    softmax,
    softmax_xent,
    upsample_time,
)
from .optim import ParamStore, adam_step

__all__ = [
    "EngineNumericsError",
    "ParamStore",
    "ShapeError",
    "Tensor",
    "adam_step",
    "concat_channels",
    "conv2d_same",
    "crop_time",
    "dense",
    "flatten_features",
    "maxpool_time",
    "mse",
    "pad_time",
    "set_finite_checks",
    "softmax",
    "softmax_xent",
    "upsample_time",
]
