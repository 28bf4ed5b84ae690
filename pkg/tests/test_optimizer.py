"""Tests for initialization, gradient clipping and Adam."""
import numpy as np
import pytest

from core import Tensor
from training import OptimState, adam_step, clip_gradients, global_grad_norm, xavier_init, zero_grad
from utils import OptimizerConfig
from utils.errors import ContractError, FormatError


def _param(data, grad=None):
    t = Tensor(np.asarray(data, dtype=float), requires_grad=True)
    t.grad = None if grad is None else np.asarray(grad, dtype=float)
    return t


class TestXavier:

    def test_variance_of_large_matrix(self):
        params = {"w": _param(np.zeros((1000, 1000)))}
        xavier_init(params, seed=0)
        expected = 2.0 / 2000
        assert abs(params["w"].data.var() - expected) / expected < 0.05
        assert np.abs(params["w"].data).max() <= np.sqrt(6.0 / 2000)

    def test_vectors(self):
        params = {"norm.gain": _param(np.zeros(4)), "layer.bias": _param(np.ones(4))}
        xavier_init(params, seed=0)
        np.testing.assert_array_equal(params["norm.gain"].data, 1.0)
        np.testing.assert_array_equal(params["layer.bias"].data, 0.0)

    def test_seeded(self):
        a, b = {"w": _param(np.zeros((3, 4)))}, {"w": _param(np.zeros((3, 4)))}
        xavier_init(a, 5)
        xavier_init(b, 5)
        np.testing.assert_array_equal(a["w"].data, b["w"].data)


class TestClipping:

    def test_large_gradient_is_scaled(self):
        params = {"a": _param([0.0], grad=[4.0])}
        assert clip_gradients(params, 1.0) == pytest.approx(0.25)
        np.testing.assert_allclose(params["a"].grad, [1.0])

    def test_global_norm_across_tensors(self):
        params = {"a": _param([0.0], grad=[3.0]), "b": _param([0.0, 0.0], grad=[0.0, 4.0]), "c": _param([1.0])}
        assert global_grad_norm(params) == pytest.approx(5.0)
        assert clip_gradients(params, 2.5) == pytest.approx(0.5)
        assert global_grad_norm(params) == pytest.approx(2.5)

    def test_small_gradient_untouched(self):
        params = {"a": _param([0.0], grad=[0.5])}
        assert clip_gradients(params, 1.0) == 1.0
        np.testing.assert_array_equal(params["a"].grad, [0.5])

    def test_threshold_must_be_positive(self):
        with pytest.raises(ContractError):
            clip_gradients({}, 0.0)


class TestAdam:

    def test_first_step_moves_by_lr(self):
        params = {"w": _param([1.0, -2.0], grad=[0.3, -5.0])}
        state = OptimState(lr=0.01)
        adam_step(params, state)
        np.testing.assert_allclose(params["w"].data, [0.99, -1.99], atol=1e-7)
        assert state.step == 1

    def test_zero_gradient_leaves_parameter(self):
        params = {"w": _param([1.5, 2.5], grad=[0.0, 0.0])}
        adam_step(params, OptimState(lr=0.1))
        np.testing.assert_array_equal(params["w"].data, [1.5, 2.5])

    def test_missing_gradient_is_skipped(self):
        params = {"w": _param([1.0])}
        state = OptimState()
        adam_step(params, state)
        assert "w" not in state.m
        np.testing.assert_array_equal(params["w"].data, [1.0])

    def test_restore_continues_identically(self):
        def run(steps, state):
            params = {"w": _param([1.0, 2.0])}
            for i in range(steps):
                params["w"].grad = np.array([0.5, -0.1]) * (i + 1)
                adam_step(params, state)
            return params, state

        _, state = run(3, OptimState(lr=0.05))
        restored = OptimState(lr=0.05)
        restored.restore(state.to_meta(), state.to_blobs(), {"w": _param([0.0, 0.0])})
        assert restored.step == 3
        np.testing.assert_array_equal(restored.m["w"], state.m["w"])
        np.testing.assert_array_equal(restored.v["w"], state.v["w"])

    def test_restore_rejects_unknown_parameter(self):
        state = OptimState()
        with pytest.raises(FormatError):
            state.restore({"optim_step": "1"}, {"optim.m.ghost": np.zeros(2)}, {"w": _param([0.0, 0.0])})

    def test_from_config(self):
        state = OptimState.from_config(OptimizerConfig(lr=3e-3, clip=2.0))
        assert state.lr == 3e-3 and state.clip == 2.0 and state.step == 0

    def test_zero_grad(self):
        params = {"w": _param([1.0], grad=[2.0])}
        zero_grad(params)
        assert params["w"].grad is None
