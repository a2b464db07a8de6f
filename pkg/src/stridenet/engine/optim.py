"""Named parameter storage and the adaptive-moment optimizer."""

from __future__ import annotations

import numpy as np

from .tensor import EngineNumericsError, ShapeError, Tensor, as_f32


class ParamStore:
    """Named trainable tensors plus per-parameter optimizer moments.

    Moment buffers always shape-match their parameter; the step counter
    advances by exactly one per optimizer step.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, values) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(as_f32(values), requires_grad=True, op=f"param:{name}")
        self._params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def collect_grads(self) -> dict[str, np.ndarray]:
        """Gradients after a backward pass; parameters the loss never reached get zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._params.items()
        }

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, values in arrays.items():
            t = self._params[name]
            if t.data.shape != values.shape:
                raise ShapeError(f"state for {name!r} has shape {values.shape}, expected {t.data.shape}")
            t.data = as_f32(values).copy()


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected adaptive-moment update, in place."""
    for name, grad in grads.items():
        if name not in store:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if grad.shape != store[name].data.shape:
            raise ShapeError(
                f"gradient for {name!r} has shape {grad.shape}, expected {store[name].data.shape}"
            )
        if not np.isfinite(grad).all():
            raise EngineNumericsError(f"non-finite gradient for parameter {name!r}")

    store.step_count += 1
    t = store.step_count
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    for name, grad in grads.items():
        g = grad.astype(np.float32, copy=False)
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (m / corr1) / (np.sqrt(v / corr2) + eps)
        store[name].data -= np.float32(lr) * update
