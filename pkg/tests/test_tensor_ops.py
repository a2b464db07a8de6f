"""Forward contracts of the engine ops against brute-force oracles."""

import numpy as np
import pytest

from stridenet.engine import (
    ShapeError,
    Tensor,
    concat_channels,
    conv2d_same,
    crop_time,
    dense,
    maxpool_time,
    mse,
    pad_time,
    softmax,
    softmax_xent,
    upsample_time,
)


def conv2d_loop_oracle(x, w, b):
    """Direct 6-nested-loop same-padding convolution."""
    c_out, c_in, k, _ = w.shape
    _, h, wd = x.shape
    pad = (k - 1) // 2
    out = np.zeros((c_out, h, wd), dtype=np.float64)
    for co in range(c_out):
        for i in range(h):
            for j in range(wd):
                acc = float(b[co])
                for ci in range(c_in):
                    for ki in range(k):
                        for kj in range(k):
                            ii, jj = i + ki - pad, j + kj - pad
                            if 0 <= ii < h and 0 <= jj < wd:
                                acc += float(x[ci, ii, jj]) * float(w[co, ci, ki, kj])
                out[co, i, j] = acc
    return out


class TestConv2dSame:
    def test_zero_input_gives_bias(self):
        rng = np.random.default_rng(0)
        x = Tensor(np.zeros((1, 1, 4), dtype=np.float32))
        w = Tensor(rng.normal(size=(3, 1, 3, 3)).astype(np.float32))
        b = Tensor(np.array([0.5, -1.0, 2.0], dtype=np.float32))
        y = conv2d_same(x, w, b).data
        assert y.shape == (3, 1, 4)
        for co, bias in enumerate([0.5, -1.0, 2.0]):
            assert np.allclose(y[co], bias)

    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 6, 12)).astype(np.float32)
        w = np.zeros((1, 1, 3, 3), dtype=np.float32)
        w[0, 0, 1, 1] = 1.0
        y = conv2d_same(Tensor(x), Tensor(w), Tensor(np.zeros(1, dtype=np.float32)))
        np.testing.assert_allclose(y.data, x, atol=1e-7)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(1, 6, 8)).astype(np.float32)
        w = rng.normal(size=(4, 1, 3, 3)).astype(np.float32)
        b = rng.normal(size=4).astype(np.float32)
        y = conv2d_same(Tensor(x), Tensor(w), Tensor(b)).data
        expected = conv2d_loop_oracle(x, w, b)
        assert np.max(np.abs(y - expected)) < 1e-5

    def test_multichannel_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(3, 6, 10)).astype(np.float32)
        w = rng.normal(size=(2, 3, 3, 3)).astype(np.float32)
        b = rng.normal(size=2).astype(np.float32)
        y = conv2d_same(Tensor(x), Tensor(w), Tensor(b)).data
        expected = conv2d_loop_oracle(x, w, b)
        assert np.max(np.abs(y - expected)) < 1e-5

    def test_linearity(self):
        rng = np.random.default_rng(4)
        w = Tensor(rng.normal(size=(2, 2, 3, 3)).astype(np.float32))
        b = Tensor(np.zeros(2, dtype=np.float32))
        x = rng.normal(size=(2, 6, 16)).astype(np.float32)
        y = rng.normal(size=(2, 6, 16)).astype(np.float32)
        a_coef, b_coef = 1.7, -0.4
        combined = conv2d_same(Tensor(a_coef * x + b_coef * y), w, b).data
        separate = a_coef * conv2d_same(Tensor(x), w, b).data + b_coef * conv2d_same(Tensor(y), w, b).data
        assert np.max(np.abs(combined - separate)) < 1e-5

    def test_channel_mismatch_rejected(self):
        x = Tensor(np.zeros((2, 6, 8), dtype=np.float32))
        w = Tensor(np.zeros((4, 3, 3, 3), dtype=np.float32))
        b = Tensor(np.zeros(4, dtype=np.float32))
        with pytest.raises(ShapeError):
            conv2d_same(x, w, b)


class TestMaxpoolTime:
    def test_small_window(self):
        y = maxpool_time(Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]], dtype=np.float32)), 4)
        np.testing.assert_allclose(y.data, [[[4.0]]])

    def test_constant_input(self):
        x = np.full((2, 3, 8), 2.5, dtype=np.float32)
        y = maxpool_time(Tensor(x), 4)
        assert y.data.shape == (2, 3, 2)
        assert np.all(y.data == 2.5)

    def test_matches_windowed_max_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 6, 16)).astype(np.float32)
        y = maxpool_time(Tensor(x), 4).data
        expected = np.zeros((2, 6, 4), dtype=np.float32)
        for c in range(2):
            for h in range(6):
                for j in range(4):
                    expected[c, h, j] = max(x[c, h, 4 * j : 4 * j + 4])
        np.testing.assert_allclose(y, expected)

    def test_indivisible_width_rejected(self):
        with pytest.raises(ShapeError):
            maxpool_time(Tensor(np.zeros((1, 1, 10), dtype=np.float32)), 4)


class TestUpsampleTime:
    def test_repeats_values(self):
        y = upsample_time(Tensor(np.array([[[5.0]]], dtype=np.float32)), 4)
        np.testing.assert_allclose(y.data, [[[5.0, 5.0, 5.0, 5.0]]])

    def test_factor_one_is_identity(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 3, 5)).astype(np.float32)
        np.testing.assert_allclose(upsample_time(Tensor(x), 1).data, x)

    def test_gradient_of_sum_is_factor(self):
        # d sum(upsample(x)) / dx == k everywhere, checked by central differences.
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 2, 3)).astype(np.float32)
        k, h = 4, 1e-3

        def f(values):
            return float(upsample_time(Tensor(values), k).data.sum())

        t = Tensor(x, requires_grad=True)
        upsample_time(t, k).sum().backward()
        for idx in np.ndindex(x.shape):
            hi, lo = x.copy(), x.copy()
            hi[idx] += h
            lo[idx] -= h
            fd = (f(hi) - f(lo)) / (2 * h)
            assert abs(fd - k) < 1e-2
            assert t.grad[idx] == pytest.approx(k)


class TestDense:
    def test_zero_input_gives_bias(self):
        w = Tensor(np.ones((4, 3), dtype=np.float32))
        b = Tensor(np.array([1.0, 2.0, 3.0], dtype=np.float32))
        y = dense(Tensor(np.zeros(4, dtype=np.float32)), w, b)
        np.testing.assert_allclose(y.data, [1.0, 2.0, 3.0])

    def test_identity_weights(self):
        x = np.array([3.0, -1.0, 0.5], dtype=np.float32)
        y = dense(Tensor(x), Tensor(np.eye(3, dtype=np.float32)), Tensor(np.zeros(3, dtype=np.float32)))
        np.testing.assert_allclose(y.data, x)

    def test_matches_dot_oracle(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=8).astype(np.float32)
        w = rng.normal(size=(8, 3)).astype(np.float32)
        b = rng.normal(size=3).astype(np.float32)
        y = dense(Tensor(x), Tensor(w), Tensor(b)).data
        expected = [sum(float(x[i]) * float(w[i, j]) for i in range(8)) + float(b[j]) for j in range(3)]
        assert np.max(np.abs(y - np.array(expected))) < 1e-6

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            dense(Tensor(np.zeros(5, dtype=np.float32)), Tensor(np.zeros((4, 2), dtype=np.float32)),
                  Tensor(np.zeros(2, dtype=np.float32)))


class TestSoftmaxXent:
    def test_uniform_logits(self):
        for target in (0, 1):
            loss = softmax_xent(Tensor(np.zeros(2, dtype=np.float32)), target)
            assert loss.item() == pytest.approx(np.log(2.0), abs=1e-6)

    def test_saturated_correct(self):
        loss = softmax_xent(Tensor(np.array([20.0, -20.0], dtype=np.float32)), 0)
        assert loss.item() < 1e-8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=2).astype(np.float32)
        target, h = 1, 1e-3
        t = Tensor(logits, requires_grad=True)
        softmax_xent(t, target).backward()
        for i in range(2):
            hi, lo = logits.copy(), logits.copy()
            hi[i] += h
            lo[i] -= h
            fd = (softmax_xent(Tensor(hi), target).item() - softmax_xent(Tensor(lo), target).item()) / (2 * h)
            assert abs(t.grad[i] - fd) / max(abs(fd), 1e-4) < 1e-3

    def test_target_out_of_range(self):
        with pytest.raises(ShapeError):
            softmax_xent(Tensor(np.zeros(2, dtype=np.float32)), 2)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            probs = softmax(rng.normal(scale=5.0, size=(4, 2)))
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


class TestLayoutOps:
    def test_pad_then_crop_roundtrip(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(1, 6, 600)).astype(np.float32)
        padded = pad_time(Tensor(x), 640)
        assert padded.data.shape == (1, 6, 640)
        assert np.all(padded.data[:, :, 600:] == 0.0)
        np.testing.assert_allclose(crop_time(padded, 600).data, x)

    def test_concat_channels(self):
        a = np.ones((2, 3, 4), dtype=np.float32)
        b = np.full((5, 3, 4), 2.0, dtype=np.float32)
        y = concat_channels([Tensor(a), Tensor(b)])
        assert y.data.shape == (7, 3, 4)
        assert np.all(y.data[:2] == 1.0) and np.all(y.data[2:] == 2.0)

    def test_mse_zero_when_equal(self):
        x = Tensor(np.array([1.0, 2.0], dtype=np.float32))
        assert mse(x, np.array([1.0, 2.0], dtype=np.float32)).item() == 0.0
