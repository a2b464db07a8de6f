"""Adaptive-moment optimizer contracts."""

import numpy as np
import pytest

from stridenet.engine import EngineNumericsError, ParamStore, Tensor, adam_step


def make_store(values):
    store = ParamStore()
    store.add("p", values)
    return store


class TestAdamStep:
    def test_zero_grads_leave_params_unchanged(self):
        store = make_store(np.array([1.0, -2.0, 3.0], dtype=np.float32))
        adam_step(store, {"p": np.zeros(3, dtype=np.float32)}, lr=0.1)
        np.testing.assert_allclose(store["p"].data, [1.0, -2.0, 3.0])
        assert store.step_count == 1

    def test_first_step_magnitude_and_sign(self):
        # With bias correction the first update is lr * g / (|g| + eps).
        grad = np.array([0.25, -3.0, 1e-4], dtype=np.float32)
        store = make_store(np.zeros(3, dtype=np.float32))
        adam_step(store, {"p": grad}, lr=1e-2)
        update = store["p"].data
        np.testing.assert_allclose(np.abs(update), 1e-2, rtol=1e-3)
        np.testing.assert_allclose(np.sign(update), -np.sign(grad))

    def test_quadratic_bowl_converges(self):
        target = np.array([0.7, -1.3], dtype=np.float32)
        store = make_store(np.array([5.0, -6.0], dtype=np.float32))
        loss = None
        for _ in range(500):
            p = store["p"]
            p.grad = None
            diff = p - Tensor(target)
            loss_t = (diff * diff).sum()
            loss_t.backward()
            adam_step(store, store.collect_grads(), lr=0.05)
            loss = loss_t.item()
        assert loss < 1e-6
        assert store.step_count == 500

    def test_nan_grads_rejected(self):
        store = make_store(np.ones(2, dtype=np.float32))
        with pytest.raises(EngineNumericsError):
            adam_step(store, {"p": np.array([np.nan, 0.0], dtype=np.float32)}, lr=0.1)

    def test_moment_buffers_shape_match(self):
        store = ParamStore()
        store.add("w", np.zeros((3, 4), dtype=np.float32))
        store.add("b", np.zeros(4, dtype=np.float32))
        for name, tensor in store.items():
            assert store.m[name].shape == tensor.data.shape
            assert store.v[name].shape == tensor.data.shape

    def test_step_counter_strictly_increments(self):
        store = make_store(np.ones(1, dtype=np.float32))
        for expected in range(1, 5):
            adam_step(store, {"p": np.ones(1, dtype=np.float32)}, lr=1e-3)
            assert store.step_count == expected
