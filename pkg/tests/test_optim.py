"""Tests for SGD updates and learning-rate scheduling."""

import numpy as np
import pytest

from src.nn.network import NetworkState
from src.nn.optim import OptimizerState, scheduled_learning_rate, sgd_step
from src.tensor.tensor import NonFiniteError, ShapeError, Tensor


def _state() -> NetworkState:
    return NetworkState(
        {
            "generator.0.weight": Tensor([1.0, 2.0], dtype="double"),
            "classifier.0.weight": Tensor([3.0], dtype="double"),
        }
    )


class TestSGD:
    """Tests for sgd_step."""

    def test_plain_step(self):
        """Without momentum or decay the update is w - lr * g."""
        opt = OptimizerState(0.1, momentum=0.0, weight_decay=0.0)
        new = sgd_step(_state(), {"generator.0.weight": np.array([1.0, -1.0])}, opt)
        np.testing.assert_allclose(new.parameters["generator.0.weight"].data, [0.9, 2.1])

    def test_momentum(self):
        """The second step adds momentum times the first velocity."""
        opt = OptimizerState(0.1, momentum=0.9, weight_decay=0.0)
        grad = {"classifier.0.weight": np.array([1.0])}
        state = sgd_step(_state(), grad, opt)
        state = sgd_step(state, grad, opt)
        # v1 = -0.1, v2 = 0.9 * -0.1 - 0.1 = -0.19
        np.testing.assert_allclose(state.parameters["classifier.0.weight"].data, [3.0 - 0.1 - 0.19])

    def test_weight_decay(self):
        """Decay adds wd * w to the gradient."""
        opt = OptimizerState(0.5, momentum=0.0, weight_decay=0.1)
        new = sgd_step(_state(), {"classifier.0.weight": np.array([0.0])}, opt)
        np.testing.assert_allclose(new.parameters["classifier.0.weight"].data, [3.0 - 0.5 * 0.3])

    def test_frozen_groups_are_untouched(self):
        """Frozen parameters keep their tensor object."""
        state = _state().frozen_copy(["generator.0"])
        opt = OptimizerState(0.1)
        grads = {"generator.0.weight": np.ones(2), "classifier.0.weight": np.ones(1)}
        new = sgd_step(state, grads, opt)
        assert new.parameters["generator.0.weight"] is state.parameters["generator.0.weight"]
        assert "generator.0.weight" not in opt.velocity
        assert new.is_frozen("generator.0.weight")

    def test_missing_gradient_keeps_parameter(self):
        """Parameters without a gradient are carried over."""
        state = _state()
        new = sgd_step(state, {}, OptimizerState(0.1))
        assert new.parameters["classifier.0.weight"] is state.parameters["classifier.0.weight"]

    def test_unknown_parameter(self):
        """Gradients must name existing parameters."""
        with pytest.raises(ShapeError):
            sgd_step(_state(), {"nope": np.ones(1)}, OptimizerState(0.1))

    def test_wrong_gradient_shape(self):
        """Gradients must match the parameter shape."""
        with pytest.raises(ShapeError):
            sgd_step(_state(), {"classifier.0.weight": np.ones(2)}, OptimizerState(0.1))

    def test_non_finite_gradient(self):
        """NaN gradients abort the update."""
        with pytest.raises(NonFiniteError):
            sgd_step(_state(), {"classifier.0.weight": np.array([np.nan])}, OptimizerState(0.1))

    def test_overflowing_update(self):
        """An update that overflows is rejected."""
        opt = OptimizerState(1e308, momentum=0.0, weight_decay=0.0)
        with pytest.raises(NonFiniteError):
            sgd_step(_state(), {"classifier.0.weight": np.array([1e308])}, opt)

    def test_negative_hyperparameters(self):
        """Negative rates are refused at construction."""
        with pytest.raises(ValueError):
            OptimizerState(-0.1)
        with pytest.raises(ValueError):
            OptimizerState(0.1, momentum=-1.0)


class TestSchedule:
    """Tests for scheduled_learning_rate."""

    def test_constant_without_milestones(self):
        """No milestones keeps the base rate."""
        assert scheduled_learning_rate(0.2, 7) == 0.2

    def test_step_decay(self):
        """Each reached milestone multiplies by the factor."""
        assert scheduled_learning_rate(0.2, 4, [5, 10]) == 0.2
        assert scheduled_learning_rate(0.2, 5, [5, 10]) == pytest.approx(0.02)
        assert scheduled_learning_rate(0.2, 12, [5, 10], factor=0.5) == pytest.approx(0.05)
