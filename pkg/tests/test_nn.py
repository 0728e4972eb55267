import json

import numpy as np
import pytest

from doust.errors import ConfigurationError
from doust.nn import (
    AdamState,
    DenseLayer,
    MlpNetwork,
    init_network,
    shifted_sigmoid,
)

from gradcheck import finite_difference_grads, max_relative_error, random_net_and_batch


class TestShiftedSigmoid:
    def test_midpoint_at_one(self):
        assert shifted_sigmoid(np.array([1.0]))[0] == 0.5

    def test_value_at_zero(self):
        expected = 1.0 / (1.0 + np.e)
        assert shifted_sigmoid(np.array([0.0]))[0] == pytest.approx(expected, rel=1e-15)

    def test_limits_stay_in_open_interval(self):
        extremes = shifted_sigmoid(np.array([-1e6, -750.0, 750.0, 1e6]))
        assert np.all(extremes > 0.0)
        assert np.all(extremes < 1.0)
        assert extremes[0] < 1e-300
        assert extremes[-1] > 1.0 - 1e-15

    def test_strictly_increasing(self):
        x = np.linspace(-30.0, 30.0, 5001)
        s = shifted_sigmoid(x)
        assert np.all(np.diff(s) > 0)

    def test_no_overflow_warnings(self):
        with np.errstate(over="raise"):
            shifted_sigmoid(np.array([-1e8, 1e8]))


class TestForward:
    def test_zero_weights_give_midrange_constant(self):
        net = init_network(3, (4, 4), seed=0)
        for layer in net.layers:
            layer.weights[:] = 0.0
        scores = net.forward(np.random.default_rng(0).normal(size=(7, 3)))
        expected = 1.0 / (1.0 + np.e)
        np.testing.assert_allclose(scores, expected, rtol=1e-15)

    def test_identity_single_weight(self):
        net = MlpNetwork([DenseLayer(np.array([[1.0]]))])
        assert net.forward(np.array([[1.0]]))[0] == 0.5

    def test_duplicated_row_duplicated_score(self):
        net = init_network(4, (5, 3), seed=1)
        row = np.random.default_rng(1).normal(size=(1, 4))
        batch = np.vstack([row, row, row])
        scores = net.forward(batch)
        assert scores[0] == scores[1] == scores[2]

    def test_scores_in_open_interval(self):
        net = init_network(2, (6, 6), seed=2)
        x = np.random.default_rng(3).normal(scale=100.0, size=(50, 2))
        s = net.forward(x)
        assert np.all((s > 0) & (s < 1))

    def test_dimension_mismatch(self):
        net = init_network(3, (4,), seed=0)
        with pytest.raises(ConfigurationError):
            net.forward(np.zeros((2, 5)))

    def test_forward_is_deterministic(self):
        net = init_network(3, (10, 10), seed=5)
        x = np.random.default_rng(7).normal(size=(20, 3))
        np.testing.assert_array_equal(net.forward(x), net.forward(x))


class TestBackward:
    def test_zero_loss_gradient_gives_zero_weight_gradients(self):
        net = init_network(3, (4, 4), seed=0)
        x = np.random.default_rng(0).normal(size=(5, 3))
        _, cache = net.forward_cached(x)
        grads = net.backward(cache, np.zeros(5))
        for g in grads:
            assert np.all(g == 0.0)

    def test_two_weight_symbolic_oracle(self):
        # One linear layer, squared loss to target y: dL/dw_j equals
        # 2 (s - y) * s(1-s) * x_j summed over the batch.
        rng = np.random.default_rng(11)
        w = rng.normal(size=(2, 1))
        net = MlpNetwork([DenseLayer(w.copy())])
        x = rng.normal(size=(6, 2))
        y = rng.uniform(0.2, 0.8, size=6)
        scores, cache = net.forward_cached(x)
        grads = net.backward(cache, 2.0 * (scores - y))
        symbolic = (2.0 * (scores - y) * scores * (1.0 - scores))[:, None] * x
        np.testing.assert_allclose(grads[0], symbolic.sum(axis=0)[:, None], rtol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            net, batch, loss_fn, score_grad = random_net_and_batch(rng)
            scores, cache = net.forward_cached(batch)
            analytic = net.backward(cache, score_grad(scores))
            numeric = finite_difference_grads(net, batch, loss_fn)
            assert max_relative_error(analytic, numeric) < 1e-4


class TestAdam:
    def test_zero_gradients_leave_weights_unchanged(self):
        net = init_network(2, (3,), seed=4)
        before = [l.weights.copy() for l in net.layers]
        state = AdamState.for_network(net)
        state.step(net, [np.zeros_like(l.weights) for l in net.layers])
        for b, layer in zip(before, net.layers):
            np.testing.assert_array_equal(b, layer.weights)

    def test_constant_gradient_moves_opposite_sign(self):
        net = init_network(2, (3,), seed=4)
        before = [l.weights.copy() for l in net.layers]
        state = AdamState.for_network(net)
        grads = [np.full_like(l.weights, 0.5) for l in net.layers]
        for _ in range(50):
            state.step(net, grads)
        for b, layer in zip(before, net.layers):
            assert np.all(layer.weights < b)

    def test_first_step_magnitude_is_learning_rate(self):
        net = init_network(2, (3,), seed=4)
        before = [l.weights.copy() for l in net.layers]
        state = AdamState.for_network(net, learning_rate=1e-3)
        grads = [np.full_like(l.weights, 2.0) for l in net.layers]
        state.step(net, grads)
        # bias-corrected first step is lr * g / (|g| + eps) ~ lr
        for b, layer in zip(before, net.layers):
            np.testing.assert_allclose(b - layer.weights, 1e-3, rtol=1e-6)

    def test_shape_mismatch_rejected(self):
        net = init_network(2, (3,), seed=4)
        state = AdamState.for_network(net)
        bad = [np.zeros((1, 1)) for _ in net.layers]
        with pytest.raises(ConfigurationError):
            state.step(net, bad)


class TestInit:
    def test_same_seed_bit_identical(self):
        a = init_network(7, (9, 5), seed=123)
        b = init_network(7, (9, 5), seed=123)
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_different_seeds_differ(self):
        a = init_network(7, (9, 5), seed=123)
        b = init_network(7, (9, 5), seed=124)
        assert any(np.any(la.weights != lb.weights) for la, lb in zip(a.layers, b.layers))

    def test_fan_in_scaled_variance(self):
        net = init_network(100, (100,), seed=0)
        w = net.layers[0].weights  # 100 x 100 = 1e4 draws, target var 1/100
        sample_var = w.var()
        assert abs(sample_var - 0.01) < 0.2 * 0.01

    def test_zero_dimension_rejected(self):
        with pytest.raises(ConfigurationError):
            init_network(0, (5,), seed=0)
        with pytest.raises(ConfigurationError):
            init_network(3, (0,), seed=0)


class TestSerialization:
    def test_round_trip(self):
        net = init_network(4, (6, 3), seed=9)
        clone = MlpNetwork.from_dict(net.to_dict())
        for a, b in zip(net.layers, clone.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
        x = np.random.default_rng(0).normal(size=(10, 4))
        np.testing.assert_array_equal(net.forward(x), clone.forward(x))

    def test_no_bias_parameters_serialized(self):
        payload = json.dumps(init_network(4, (6, 3), seed=9).to_dict())
        assert "bias" not in payload.lower()

    def test_version_field_mandatory(self):
        net = init_network(2, (3,), seed=0)
        payload = net.to_dict()
        payload["format_version"] = 999
        with pytest.raises(ConfigurationError):
            MlpNetwork.from_dict(payload)

    def test_layer_width_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            MlpNetwork([DenseLayer(np.zeros((2, 3))), DenseLayer(np.zeros((4, 1)))])
