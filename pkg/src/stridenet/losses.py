"""Regression losses for stride length.

The percent-error-weighted RMSE scales each squared error by
beta = exp(|p - g| / g) before the root-mean, so relative misses on short
strides weigh as much as absolute misses on long ones. Since beta >= 1,
the weighted loss always dominates plain RMSE, with equality exactly when
every prediction matches its target.
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor


def _as_target(truth, like: Tensor) -> Tensor:
    arr = np.asarray(truth, dtype=np.float32)
    if arr.shape != like.data.shape:
        raise ValueError(f"truth shape {arr.shape} does not match predictions {like.data.shape}")
    return Tensor(arr)


def pew_rmse(pred: Tensor, truth) -> Tensor:
    """sqrt(mean(exp(|p-g|/g) * (p-g)^2)); ground truth must be positive."""
    arr = np.asarray(truth, dtype=np.float32)
    if np.any(arr <= 0.0):
        raise ValueError("pew_rmse needs strictly positive ground truth")
    target = _as_target(arr, pred)
    diff = pred - target
    beta = (diff.abs() / target).exp()
    return (beta * diff * diff).mean().sqrt()


def rmse(pred: Tensor, truth) -> Tensor:
    """Plain root-mean-square error; the ablation baseline."""
    diff = pred - _as_target(np.asarray(truth, dtype=np.float32), pred)
    return (diff * diff).mean().sqrt()


REGRESSION_LOSSES = {"pew_rmse": pew_rmse, "rmse": rmse}
