import math

import numpy as np
import pytest

from jocor import AdamConfig, AdamState, Mlp, adam_step
from jocor.exceptions import ConfigurationError, NumericError, ShapeError
from jocor.losses import cross_entropy, cross_entropy_gradient


def test_parameter_count_mnist_architecture():
    net = Mlp([784, 256, 10], seed=1)
    assert net.num_parameters() == 784 * 256 + 256 + 256 * 10 + 10


def test_same_seed_identical_parameters():
    a = Mlp([2, 2], seed=7)
    b = Mlp([2, 2], seed=7)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert pa.tobytes() == pb.tobytes()


def test_different_seeds_differ():
    a = Mlp([2, 2], seed=7)
    b = Mlp([2, 2], seed=8)
    assert any(not np.array_equal(pa, pb)
               for pa, pb in zip(a.parameters(), b.parameters()))


def test_biases_start_zero_and_weights_bounded():
    net = Mlp([20, 8, 5], seed=0)
    for layer in net.layers:
        assert np.all(layer.bias == 0.0)
        limit = math.sqrt(6.0 / layer.weights.shape[0])
        assert np.abs(layer.weights).max() <= limit


@pytest.mark.parametrize("widths", [[], [5], [4, 0, 3], [4, -1], [3, 2.5]])
def test_invalid_widths_rejected(widths):
    with pytest.raises(ConfigurationError):
        Mlp(widths, seed=0)


def test_zero_weight_network_gives_uniform_rows():
    net = Mlp([6, 4, 5], seed=3)
    for p in net.parameters():
        p[...] = 0.0
    p = net.forward(np.random.default_rng(0).random((7, 6))).probabilities
    assert np.allclose(p, 1.0 / 5, atol=1e-15)


def test_closed_form_softmax():
    # single linear layer producing logits [0, ln 3]
    net = Mlp([2, 2], seed=0)
    net.layers[0].weights[...] = np.eye(2)
    net.layers[0].bias[...] = 0.0
    p = net.forward(np.array([[0.0, math.log(3.0)]])).probabilities
    assert np.allclose(p, [[0.25, 0.75]], atol=1e-12)


def test_rows_sum_to_one_for_random_networks():
    rng = np.random.default_rng(11)
    for _ in range(20):
        widths = [int(rng.integers(2, 9)) for _ in range(rng.integers(2, 4))]
        net = Mlp(widths, seed=int(rng.integers(1000)))
        x = rng.standard_normal((int(rng.integers(1, 16)), widths[0])) * 3
        p = net.forward(x).probabilities
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-9
        assert p.min() > 0.0


def test_forward_shape_mismatch():
    net = Mlp([4, 3], seed=0)
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 5)))


def test_backward_zero_upstream_gives_zero_gradients():
    net = Mlp([5, 4, 3], seed=2)
    trace = net.forward(np.random.default_rng(1).random((6, 5)))
    grads = net.backward(trace, np.zeros_like(trace.probabilities))
    for g in grads:
        assert np.all(g == 0.0)


def test_backward_shape_mismatch():
    net = Mlp([5, 3], seed=2)
    trace = net.forward(np.zeros((2, 5)))
    with pytest.raises(ShapeError):
        net.backward(trace, np.zeros((2, 4)))


def test_cross_entropy_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = Mlp([4, 5, 3], seed=9)
    x = rng.standard_normal((1, 4))
    y = np.array([2])

    def loss():
        return float(cross_entropy(net.forward(x).probabilities, y)[0])

    trace = net.forward(x)
    grads = net.backward(trace, cross_entropy_gradient(trace.probabilities, y))
    eps = 1e-5
    for p, g in zip(net.parameters(), grads):
        flat_p, flat_g = p.ravel(), g.ravel()
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + eps
            up = loss()
            flat_p[j] = orig - eps
            down = loss()
            flat_p[j] = orig
            fd = (up - down) / (2 * eps)
            assert abs(flat_g[j] - fd) <= 1e-4 * max(abs(fd), abs(flat_g[j]), 1e-6)


def test_duplicated_example_doubles_gradient():
    rng = np.random.default_rng(8)
    net = Mlp([3, 4, 2], seed=4)
    x = rng.standard_normal((1, 3))
    y = np.array([1])
    trace1 = net.forward(x)
    g_single = net.backward(trace1,
                            cross_entropy_gradient(trace1.probabilities, y))
    x2 = np.vstack([x, x])
    y2 = np.array([1, 1])
    trace2 = net.forward(x2)
    g_double = net.backward(trace2,
                            cross_entropy_gradient(trace2.probabilities, y2))
    for gs, gd in zip(g_single, g_double):
        assert np.allclose(gd, 2.0 * gs, rtol=0, atol=1e-15)


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        net = Mlp([3, 2], seed=1)
        before = [p.copy() for p in net.parameters()]
        net.adam_step([np.zeros_like(p) for p in net.parameters()],
                      AdamConfig(learning_rate=0.1))
        for b, p in zip(before, net.parameters()):
            assert np.array_equal(b, p)

    def test_first_step_closed_form(self):
        # scalar parameter 0, gradient 1, lr 0.1: bias-corrected first step
        # moves by lr * 1 / (1 + eps)
        w = np.zeros((1, 1))
        state = AdamState([w])
        cfg = AdamConfig(learning_rate=0.1)
        adam_step([w], [np.ones((1, 1))], state, cfg)
        expected = -0.1 * 1.0 / (1.0 + cfg.epsilon)
        assert w[0, 0] == pytest.approx(expected, abs=1e-15)
        assert w[0, 0] == pytest.approx(-0.1, abs=1e-6)
        assert state.step == 1

    def test_zero_learning_rate_updates_moments_only(self):
        w = np.full((2,), 0.5)
        state = AdamState([w])
        adam_step([w], [np.ones(2)], state, AdamConfig(learning_rate=0.0))
        assert np.array_equal(w, [0.5, 0.5])
        assert state.step == 1
        assert np.all(state.first[0] != 0.0)
        assert np.all(state.second[0] != 0.0)

    def test_non_finite_gradient_names_parameter_block(self):
        net = Mlp([3, 2], seed=1)
        grads = [np.zeros_like(p) for p in net.parameters()]
        grads[1][0] = np.inf
        with pytest.raises(NumericError, match="layer0.bias"):
            net.adam_step(grads, AdamConfig())

    def test_gradient_shape_mismatch(self):
        w = np.zeros((2, 2))
        with pytest.raises(ShapeError):
            adam_step([w], [np.zeros(3)], AdamState([w]), AdamConfig())

    @pytest.mark.parametrize("kwargs", [
        dict(beta1=1.0), dict(beta2=-0.1), dict(epsilon=0.0),
        dict(learning_rate=-1.0),
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigurationError):
            AdamConfig(**kwargs)


def test_training_determinism():
    # identical (seed, config, data) -> bit-identical parameters after N steps
    rng = np.random.default_rng(3)
    x = rng.random((32, 6))
    y = rng.integers(0, 3, 32)

    def run():
        net = Mlp([6, 8, 3], seed=5)
        cfg = AdamConfig(learning_rate=0.01)
        for _ in range(10):
            trace = net.forward(x)
            grads = net.backward(
                trace, cross_entropy_gradient(trace.probabilities, y) / len(y))
            net.adam_step(grads, cfg)
        return net

    a, b = run(), run()
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert pa.tobytes() == pb.tobytes()
