"""Float32 tensor with a taped reverse-mode gradient.

A ``Tensor`` wraps a contiguous float32 ndarray plus the closure that
propagates gradients to its parents. ``backward()`` on a scalar loss walks
the graph once in reverse topological order. Non-finite values anywhere in
a forward or backward pass are a hard error, never silently propagated.

Backward closures receive the node's gradient as an argument and must not
reference the node itself: a closure that captured its own tensor would
form a reference cycle, and training graphs are large enough (hundreds of
MB of cached convolution patches) that waiting on the cycle collector
exhausts memory.
"""

from __future__ import annotations

import numpy as np


class EngineNumericsError(RuntimeError):
    """A forward or backward pass produced NaN or Inf."""


class ShapeError(ValueError):
    """Operands do not satisfy an operation's shape contract."""


_FINITE_CHECKS = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle per-op finite validation; returns the previous setting."""
    global _FINITE_CHECKS
    previous = _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)
    return previous


def as_f32(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    # ascontiguousarray would promote 0-d scalars to 1-d; keep them 0-d.
    return arr if arr.ndim == 0 else np.ascontiguousarray(arr)


def check_finite(values: np.ndarray, context: str) -> None:
    if not np.isfinite(values).all():
        raise EngineNumericsError(f"non-finite values in {context}")


def _maybe_check(values: np.ndarray, context: str) -> None:
    if _FINITE_CHECKS:
        check_finite(values, context)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph.

    Attributes:
        data: contiguous float32 ndarray holding the value.
        grad: float32 ndarray of the same shape, populated by ``backward``.
        requires_grad: whether gradients flow to this node.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "op")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None, op="leaf"):
        self.data = as_f32(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = tuple(parents)
        self._backward_fn = backward_fn
        self.op = op
        if op == "leaf":
            _maybe_check(self.data, "leaf tensor")

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, grad: np.ndarray, owned: bool = False) -> None:
        """Add ``grad`` into this node's gradient buffer.

        ``owned`` asserts the array is a fresh allocation no other node will
        receive, letting the first accumulation adopt it without a copy.
        """
        grad = _unbroadcast(np.asarray(grad, dtype=np.float32), self.data.shape)
        if self.grad is None:
            if owned:
                self.grad = grad if grad.flags["C_CONTIGUOUS"] else np.ascontiguousarray(grad)
            else:
                self.grad = grad.copy()
        else:
            self.grad += grad

    # -- graph construction helpers -------------------------------------------

    @staticmethod
    def _lift(value) -> "Tensor":
        if isinstance(value, Tensor):
            return value
        return Tensor(np.asarray(value, dtype=np.float32))

    def _make(self, data, parents, backward_fn, op) -> "Tensor":
        requires = any(p.requires_grad for p in parents)
        out = Tensor(
            data,
            requires_grad=requires,
            parents=parents if requires else (),
            backward_fn=backward_fn if requires else None,
            op=op,
        )
        _maybe_check(out.data, f"forward op {op!r}")
        return out

    def _attach(self, backward_fn) -> "Tensor":
        if self.requires_grad:
            self._backward_fn = backward_fn
        return self

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = self._lift(other)

        def backward(grad):
            if self.requires_grad:
                self.accumulate_grad(grad)
            if other.requires_grad:
                other.accumulate_grad(grad)

        return self._make(self.data + other.data, (self, other), None, "add")._attach(backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def backward(grad):
            self.accumulate_grad(-grad, owned=True)

        return self._make(-self.data, (self,), None, "neg")._attach(backward)

    def __sub__(self, other) -> "Tensor":
        other = self._lift(other)

        def backward(grad):
            if self.requires_grad:
                self.accumulate_grad(grad)
            if other.requires_grad:
                other.accumulate_grad(-grad)

        return self._make(self.data - other.data, (self, other), None, "sub")._attach(backward)

    def __rsub__(self, other) -> "Tensor":
        return self._lift(other) - self

    def __mul__(self, other) -> "Tensor":
        other = self._lift(other)

        def backward(grad):
            if self.requires_grad:
                self.accumulate_grad(grad * other.data, owned=True)
            if other.requires_grad:
                other.accumulate_grad(grad * self.data, owned=True)

        return self._make(self.data * other.data, (self, other), None, "mul")._attach(backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = self._lift(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = self.data / other.data

        def backward(grad):
            if self.requires_grad:
                self.accumulate_grad(grad / other.data, owned=True)
            if other.requires_grad:
                other.accumulate_grad(-grad * self.data / (other.data * other.data), owned=True)

        return self._make(quotient, (self, other), None, "div")._attach(backward)

    def __rtruediv__(self, other) -> "Tensor":
        return self._lift(other) / self

    # -- elementwise functions ---------------------------------------------------

    def exp(self) -> "Tensor":
        with np.errstate(over="ignore"):
            value = np.exp(self.data)

        def backward(grad):
            self.accumulate_grad(grad * value, owned=True)

        return self._make(value, (self,), None, "exp")._attach(backward)

    def sqrt(self) -> "Tensor":
        # Subgradient 0 at exactly 0, so sqrt of a zero loss stays finite.
        with np.errstate(invalid="ignore"):
            root = np.sqrt(self.data)

        def backward(grad):
            scale = np.where(root > 0.0, 0.5 / np.where(root > 0.0, root, 1.0), 0.0)
            self.accumulate_grad(grad * scale, owned=True)

        return self._make(root, (self,), None, "sqrt")._attach(backward)

    def abs(self) -> "Tensor":
        def backward(grad):
            self.accumulate_grad(grad * np.sign(self.data), owned=True)

        return self._make(np.abs(self.data), (self,), None, "abs")._attach(backward)

    def relu(self) -> "Tensor":
        def backward(grad):
            self.accumulate_grad(grad * (self.data > 0.0), owned=True)

        return self._make(np.maximum(self.data, 0.0), (self,), None, "relu")._attach(backward)

    # -- reductions / reshaping ----------------------------------------------------

    def sum(self) -> "Tensor":
        def backward(grad):
            self.accumulate_grad(np.broadcast_to(grad, self.data.shape))

        return self._make(np.sum(self.data, dtype=np.float32), (self,), None, "sum")._attach(backward)

    def mean(self) -> "Tensor":
        n = self.data.size

        def backward(grad):
            self.accumulate_grad(np.broadcast_to(grad / np.float32(n), self.data.shape))

        return self._make(np.mean(self.data, dtype=np.float32), (self,), None, "mean")._attach(backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def backward(grad):
            self.accumulate_grad(grad.reshape(old))

        return self._make(self.data.reshape(shape), (self,), None, "reshape")._attach(backward)

    # -- backward pass ----------------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        check_finite(self.data, "loss value")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)
                if _FINITE_CHECKS and node.grad is not None:
                    check_finite(node.grad, f"gradient of op {node.op!r}")
                # Interior gradients are consumed once; dropping them keeps
                # peak memory at one live gradient per frontier node.
                if node._parents:
                    node.grad = None
