"""Network building blocks on top of the tensor graph.

Spatial tensors are laid out NCHW. Single samples (C, H, W) are accepted
everywhere and treated as a batch of one; the batch axis is stripped again
on output. Pooling and upsampling act only along the last (time) axis.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor


def _to_batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.data.ndim == 4:
        return x, False
    if x.data.ndim == 3:
        return x.reshape((1,) + x.data.shape), True
    raise ShapeError(f"expected a (C,H,W) or (N,C,H,W) tensor, got shape {x.data.shape}")


def _squeeze_batch(y: Tensor, was_single: bool) -> Tensor:
    return y.reshape(y.data.shape[1:]) if was_single else y


def _im2col(source: np.ndarray, k: int, pad: int) -> np.ndarray:
    """Patch matrix of shape (C*k*k, N*H*W), row order (channel, ki, kj).

    Built from k*k shifted slab copies per channel rather than a strided
    gather; every copy streams long contiguous runs, which is what keeps
    the convolutions memory-bandwidth bound instead of cache bound. The
    buffer starts zeroed, so border strips never need explicit padding.
    """
    n, c, h, w = source.shape
    cols = np.zeros((c * k * k, n * h * w), dtype=np.float32)
    row = 0
    for ci in range(c):
        for ki in range(k):
            di = ki - pad
            i0, i1 = max(0, -di), min(h, h - di)
            for kj in range(k):
                dj = kj - pad
                j0, j1 = max(0, -dj), min(w, w - dj)
                np.copyto(
                    cols[row].reshape(n, h, w)[:, i0:i1, j0:j1],
                    source[:, ci, i0 + di : i1 + di, j0 + dj : j1 + dj],
                )
                row += 1
    return cols


def conv2d_same(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """2-D convolution with zero 'same' padding, stride 1.

    ``weights`` is (C_out, C_in, k, k) with k in {1, 3}; spatial dims are
    preserved exactly. The im2col patch matrix is cached on the node so the
    weight gradient reuses it.
    """
    xb, single = _to_batched(x)
    if weights.data.ndim != 4 or weights.data.shape[2] != weights.data.shape[3]:
        raise ShapeError(f"conv weights must be (C_out, C_in, k, k), got {weights.data.shape}")
    c_out, c_in, k, _ = weights.data.shape
    if k not in (1, 3):
        raise ShapeError(f"conv kernel must be 1x1 or 3x3, got {k}x{k}")
    n, c, h, w = xb.data.shape
    if c != c_in:
        raise ShapeError(f"conv input has {c} channels but weights expect {c_in}")
    if bias.data.shape != (c_out,):
        raise ShapeError(f"conv bias must be ({c_out},), got {bias.data.shape}")

    pad = (k - 1) // 2
    if k == 1:
        cols = xb.data.reshape(n, c_in, h * w).transpose(1, 0, 2).reshape(c_in, n * h * w)
        cols = np.ascontiguousarray(cols)
    else:
        cols = _im2col(xb.data, k, pad)
    flat_w = weights.data.reshape(c_out, c_in * k * k)
    out2 = flat_w @ cols
    out2 += bias.data[:, None]
    y_data = np.ascontiguousarray(out2.reshape(c_out, n, h, w).transpose(1, 0, 2, 3))

    def backward(grad):
        gyc = np.ascontiguousarray(grad.transpose(1, 0, 2, 3)).reshape(c_out, n * h * w)
        if weights.requires_grad:
            weights.accumulate_grad((gyc @ cols.T).reshape(weights.data.shape), owned=True)
        if bias.requires_grad:
            bias.accumulate_grad(gyc.sum(axis=1), owned=True)
        if xb.requires_grad:
            if k == 1:
                dxc = flat_w.T @ gyc
            else:
                # dX is the same-padded correlation of dY with the flipped,
                # channel-transposed kernel.
                flipped = weights.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
                gcols = _im2col(grad, k, pad)
                dxc = flipped.reshape(c_in, c_out * k * k) @ gcols
            xb.accumulate_grad(dxc.reshape(c_in, n, h, w).transpose(1, 0, 2, 3), owned=True)

    out = xb._make(y_data, (xb, weights, bias), None, "conv2d_same")._attach(backward)
    return _squeeze_batch(out, single)


def maxpool_time(x: Tensor, k: int) -> Tensor:
    """Max pool along the time axis only; gradient goes to the earliest max."""
    xb, single = _to_batched(x)
    n, c, h, w = xb.data.shape
    if k < 1 or w % k != 0:
        raise ShapeError(f"time width {w} not divisible by pool size {k}")
    grouped = xb.data.reshape(n, c, h, w // k, k)
    argmax = grouped.argmax(axis=4)
    y_data = np.take_along_axis(grouped, argmax[..., None], axis=4)[..., 0]

    def backward(grad):
        dz = np.zeros((n, c, h, w // k, k), dtype=np.float32)
        np.put_along_axis(dz, argmax[..., None], grad[..., None], axis=4)
        xb.accumulate_grad(dz.reshape(n, c, h, w), owned=True)

    out = xb._make(y_data, (xb,), None, "maxpool_time")._attach(backward)
    return _squeeze_batch(out, single)


def upsample_time(x: Tensor, k: int) -> Tensor:
    """Nearest-neighbor repetition along time; gradients sum over each group."""
    if k < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {k}")
    xb, single = _to_batched(x)
    n, c, h, w = xb.data.shape

    def backward(grad):
        xb.accumulate_grad(grad.reshape(n, c, h, w, k).sum(axis=4), owned=True)

    out = xb._make(np.repeat(xb.data, k, axis=3), (xb,), None, "upsample_time")._attach(backward)
    return _squeeze_batch(out, single)


def pad_time(x: Tensor, width: int) -> Tensor:
    """Zero pad the time axis on the right up to ``width``."""
    xb, single = _to_batched(x)
    n, c, h, w = xb.data.shape
    if width < w:
        raise ShapeError(f"pad target {width} is narrower than input {w}")
    data = np.zeros((n, c, h, width), dtype=np.float32)
    data[:, :, :, :w] = xb.data

    def backward(grad):
        xb.accumulate_grad(grad[:, :, :, :w])

    out = xb._make(data, (xb,), None, "pad_time")._attach(backward)
    return _squeeze_batch(out, single)


def crop_time(x: Tensor, width: int) -> Tensor:
    """Keep the first ``width`` columns of the time axis."""
    xb, single = _to_batched(x)
    n, c, h, w = xb.data.shape
    if width > w:
        raise ShapeError(f"crop target {width} is wider than input {w}")

    def backward(grad):
        full = np.zeros((n, c, h, w), dtype=np.float32)
        full[:, :, :, :width] = grad
        xb.accumulate_grad(full, owned=True)

    out = xb._make(np.ascontiguousarray(xb.data[:, :, :, :width]), (xb,), None, "crop_time")._attach(backward)
    return _squeeze_batch(out, single)


def concat_channels(parts: list[Tensor]) -> Tensor:
    """Concatenate NCHW tensors along the channel axis."""
    if not parts:
        raise ShapeError("concat_channels needs at least one tensor")
    batched = []
    single = None
    for p in parts:
        pb, s = _to_batched(p)
        if single is None:
            single = s
        elif s != single:
            raise ShapeError("cannot mix single and batched tensors in concat")
        batched.append(pb)
    data = np.concatenate([p.data for p in batched], axis=1)
    splits = np.cumsum([p.data.shape[1] for p in batched])[:-1]

    def backward(grad):
        for p, g in zip(batched, np.split(grad, splits, axis=1)):
            if p.requires_grad:
                p.accumulate_grad(g)

    out = batched[0]._make(data, tuple(batched), None, "concat_channels")._attach(backward)
    return _squeeze_batch(out, bool(single))


def flatten_features(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C*H*W); a single sample flattens to 1-D."""
    if x.data.ndim == 4:
        n = x.data.shape[0]
        return x.reshape(n, x.data.size // n)
    return x.reshape(x.data.size)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weights + bias`` for (N, D) or plain (D,) inputs."""
    single = x.data.ndim == 1
    xb = x.reshape(1, x.data.size) if single else x
    if xb.data.ndim != 2:
        raise ShapeError(f"dense input must be 1-D or 2-D, got shape {x.data.shape}")
    d_in, d_out = weights.data.shape
    if xb.data.shape[1] != d_in:
        raise ShapeError(f"dense input width {xb.data.shape[1]} != weight rows {d_in}")
    if bias.data.shape != (d_out,):
        raise ShapeError(f"dense bias must be ({d_out},), got {bias.data.shape}")

    def backward(grad):
        if xb.requires_grad:
            xb.accumulate_grad(grad @ weights.data.T, owned=True)
        if weights.requires_grad:
            weights.accumulate_grad(xb.data.T @ grad, owned=True)
        if bias.requires_grad:
            bias.accumulate_grad(grad.sum(axis=0), owned=True)

    out = xb._make(xb.data @ weights.data + bias.data, (xb, weights, bias), None, "dense")._attach(backward)
    return out.reshape(d_out) if single else out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis of a plain array (inference only)."""
    z = np.asarray(logits, dtype=np.float32)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: Tensor, targets) -> Tensor:
    """Mean softmax cross-entropy, stabilized by max subtraction.

    ``targets`` holds integer class indices, one per row of ``logits``.
    A 1-D logits vector with a scalar target is treated as a batch of one.
    """
    single = logits.data.ndim == 1
    lb = logits.reshape(1, logits.data.size) if single else logits
    n, k = lb.data.shape
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if t.shape != (n,):
        raise ShapeError(f"expected {n} targets, got shape {t.shape}")
    if t.min() < 0 or t.max() >= k:
        raise ShapeError(f"target index out of range for {k} classes: {t}")

    z = lb.data - lb.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    denom = e.sum(axis=1)
    probs = e / denom[:, None]
    rows = np.arange(n)
    losses = np.log(denom) - z[rows, t]

    def backward(grad):
        d = probs.copy()
        d[rows, t] -= 1.0
        lb.accumulate_grad(d * (grad / np.float32(n)), owned=True)

    return lb._make(np.float32(losses.mean()), (lb,), None, "softmax_xent")._attach(backward)


def mse(pred: Tensor, target) -> Tensor:
    """Mean squared error against a constant or tensor target."""
    diff = pred - target
    return (diff * diff).mean()
