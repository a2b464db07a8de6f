"""Backward-pass contracts: analytic gradients vs central finite differences."""

import numpy as np
import pytest

from stridenet.engine import (
    EngineNumericsError,
    ParamStore,
    ShapeError,
    Tensor,
    concat_channels,
    conv2d_same,
    crop_time,
    dense,
    maxpool_time,
    mse,
    pad_time,
    softmax_xent,
    upsample_time,
)

H_FD = 1e-3


def fd_gradient(f, values, h=H_FD):
    """Central finite differences of a scalar function of one array."""
    grad = np.zeros_like(values, dtype=np.float64)
    for idx in np.ndindex(values.shape):
        hi, lo = values.copy(), values.copy()
        hi[idx] += h
        lo[idx] -= h
        grad[idx] = (f(hi) - f(lo)) / (2 * h)
    return grad


def assert_grad_close(analytic, numeric, rel=1e-2, floor=0.05):
    # The floor reflects float32 forward noise: central differences at
    # h=1e-3 resolve gradients no finer than ~5e-4, so elements below the
    # floor are held to that absolute scale instead of 1% relative.
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    worst = np.max(np.abs(analytic - numeric) / denom)
    assert worst < rel, f"worst relative gradient error {worst:.3e}"


def weighted_sum(t: Tensor, weights: np.ndarray) -> Tensor:
    # Random projection to a scalar so every element's gradient is order 1.
    return (t * Tensor(weights)).sum()


def proj_sum(data: np.ndarray, weights: np.ndarray) -> float:
    # Finite-difference oracle side: accumulate in float64 so the oracle's
    # own rounding stays well below the engine's float32 resolution.
    return float((data.astype(np.float64) * weights.astype(np.float64)).sum())


class TestBackwardBasics:
    def test_grad_of_sum_is_ones(self):
        p = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3), requires_grad=True)
        p.sum().backward()
        np.testing.assert_allclose(p.grad, np.ones((2, 3)))

    def test_grad_of_half_square_sum_is_value(self):
        values = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        p = Tensor(values, requires_grad=True)
        ((p * p).sum() * 0.5).backward()
        np.testing.assert_allclose(p.grad, values, atol=1e-7)

    def test_unreachable_parameters_get_zero_grads(self):
        store = ParamStore()
        used = store.add("used", np.ones(3))
        store.add("unused", np.ones(4))
        (used * used).sum().backward()
        grads = store.collect_grads()
        np.testing.assert_allclose(grads["used"], 2 * np.ones(3))
        np.testing.assert_allclose(grads["unused"], np.zeros(4))

    def test_non_scalar_loss_rejected(self):
        p = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeError):
            (p * 2.0).backward()

    def test_nan_forward_is_hard_error(self):
        p = Tensor(np.array([-1.0], dtype=np.float32), requires_grad=True)
        with pytest.raises(EngineNumericsError):
            p.sqrt()

    def test_reused_node_accumulates(self):
        p = Tensor(np.array([3.0], dtype=np.float32), requires_grad=True)
        y = p * p + p * 2.0
        y.sum().backward()
        np.testing.assert_allclose(p.grad, [8.0])


class TestFiniteDifferenceSweep:
    """Every op's analytic gradient matches central differences within 1%."""

    def test_conv2d_input_and_weights(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=(2, 4, 6)).astype(np.float32)
        w = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
        b = rng.normal(size=3).astype(np.float32)
        proj = rng.normal(size=(3, 4, 6)).astype(np.float32)

        xt = Tensor(x, requires_grad=True)
        wt = Tensor(w, requires_grad=True)
        bt = Tensor(b, requires_grad=True)
        weighted_sum(conv2d_same(xt, wt, bt), proj).backward()

        assert_grad_close(xt.grad, fd_gradient(
            lambda v: proj_sum(conv2d_same(Tensor(v), Tensor(w), Tensor(b)).data, proj), x))
        assert_grad_close(wt.grad, fd_gradient(
            lambda v: proj_sum(conv2d_same(Tensor(x), Tensor(v), Tensor(b)).data, proj), w))
        assert_grad_close(bt.grad, fd_gradient(
            lambda v: proj_sum(conv2d_same(Tensor(x), Tensor(w), Tensor(v)).data, proj), b))

    def test_maxpool_away_from_ties(self):
        rng = np.random.default_rng(21)
        # Regenerate until every pooling window has a clear margin, so no
        # argmax flip lands within the finite-difference step.
        while True:
            x = rng.normal(size=(1, 2, 8)).astype(np.float32)
            grouped = x.reshape(1, 2, 2, 4)
            top2 = np.sort(grouped, axis=3)[..., -2:]
            if np.min(top2[..., 1] - top2[..., 0]) > 10 * H_FD:
                break
        proj = rng.normal(size=(1, 2, 2)).astype(np.float32)
        xt = Tensor(x, requires_grad=True)
        weighted_sum(maxpool_time(xt, 4), proj).backward()
        assert_grad_close(xt.grad, fd_gradient(
            lambda v: proj_sum(maxpool_time(Tensor(v), 4).data, proj), x))

    def test_maxpool_tie_routes_to_first_index(self):
        x = np.array([[[2.0, 2.0, 1.0, 2.0]]], dtype=np.float32)
        xt = Tensor(x, requires_grad=True)
        maxpool_time(xt, 4).sum().backward()
        np.testing.assert_allclose(xt.grad, [[[1.0, 0.0, 0.0, 0.0]]])

    def test_upsample_crop_pad_concat(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(2, 3, 4)).astype(np.float32)
        y = rng.normal(size=(1, 3, 8)).astype(np.float32)
        proj = rng.normal(size=(3, 3, 6)).astype(np.float32)

        def compose(xv, yv):
            up = upsample_time(Tensor(xv) if not isinstance(xv, Tensor) else xv, 2)
            cropped = crop_time(Tensor(yv) if not isinstance(yv, Tensor) else yv, 6)
            padded = pad_time(crop_time(up, 5), 6)
            return concat_channels([padded, cropped])

        xt = Tensor(x, requires_grad=True)
        yt = Tensor(y, requires_grad=True)
        weighted_sum(compose(xt, yt), proj).backward()
        assert_grad_close(xt.grad, fd_gradient(lambda v: proj_sum(compose(v, y).data, proj), x))
        assert_grad_close(yt.grad, fd_gradient(lambda v: proj_sum(compose(x, v).data, proj), y))

    def test_dense_and_elementwise_chain(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=(3, 5)).astype(np.float32)
        w = rng.normal(size=(5, 4)).astype(np.float32)
        b = rng.normal(size=4).astype(np.float32)

        def f(xv, wv, bv):
            out = dense(Tensor(xv) if not isinstance(xv, Tensor) else xv,
                        Tensor(wv) if not isinstance(wv, Tensor) else wv,
                        Tensor(bv) if not isinstance(bv, Tensor) else bv)
            z = out.relu() + (out * 0.1).exp()
            return (z * z).mean()

        xt = Tensor(x, requires_grad=True)
        wt = Tensor(w, requires_grad=True)
        bt = Tensor(b, requires_grad=True)
        f(xt, wt, bt).backward()
        assert_grad_close(xt.grad, fd_gradient(lambda v: f(v, w, b).item(), x))
        assert_grad_close(wt.grad, fd_gradient(lambda v: f(x, v, b).item(), w))
        assert_grad_close(bt.grad, fd_gradient(lambda v: f(x, w, v).item(), b))

    def test_abs_sqrt_div_chain(self):
        rng = np.random.default_rng(24)
        x = (rng.normal(size=6).astype(np.float32) + np.float32(3.0))

        def f(v):
            t = Tensor(v) if not isinstance(v, Tensor) else v
            return ((t.abs() / 2.0).sqrt() + (1.0 / t)).mean()

        xt = Tensor(x, requires_grad=True)
        f(xt).backward()
        assert_grad_close(xt.grad, fd_gradient(lambda v: f(v).item(), x))

    def test_mse_and_xent_composite(self):
        rng = np.random.default_rng(25)
        logits = rng.normal(size=(4, 2)).astype(np.float32)
        preds = rng.normal(size=4).astype(np.float32)
        targets = np.array([0, 1, 1, 0])
        goal = rng.normal(size=4).astype(np.float32)

        def f(lv, pv):
            lt = Tensor(lv) if not isinstance(lv, Tensor) else lv
            pt = Tensor(pv) if not isinstance(pv, Tensor) else pv
            return softmax_xent(lt, targets) + mse(pt, goal)

        lt = Tensor(logits, requires_grad=True)
        pt = Tensor(preds, requires_grad=True)
        f(lt, pt).backward()
        assert_grad_close(lt.grad, fd_gradient(lambda v: f(v, preds).item(), logits))
        assert_grad_close(pt.grad, fd_gradient(lambda v: f(logits, v).item(), preds))
