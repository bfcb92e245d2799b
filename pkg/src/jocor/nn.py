"""Dense-network engine: ReLU MLP, softmax head, explicit backprop, Adam.

All math runs in float64. The softmax output feeds losses that clamp
probabilities to [PROB_FLOOR, 1] before taking logarithms; the forward pass
applies the same floor so probabilities are strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, NumericError, ShapeError
from .validation import check_matrix

PROB_FLOOR = 1e-12

RELU = "relu"
LINEAR = "none"


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match weight columns "
                f"{self.weights.shape[1]}")
        if self.activation not in (RELU, LINEAR):
            raise ConfigurationError(f"unknown activation {self.activation!r}")


@dataclass
class ForwardTrace:
    """Cached intermediates of one forward pass."""
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    probabilities: np.ndarray  # (batch, classes), rows sum to 1


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ConfigurationError("Adam epsilon must be positive")
        if self.learning_rate < 0.0:
            raise ConfigurationError("learning rate must be >= 0")


class AdamState:
    """First/second moment estimates plus a step counter for one parameter list."""

    def __init__(self, params: list[np.ndarray]):
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]
        self.step = 0


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, cfg: AdamConfig,
              names: list[str] | None = None) -> None:
    """Standard bias-corrected Adam update, applied in place."""
    if len(grads) != len(params) or len(state.first) != len(params):
        raise ShapeError("gradient/state list length does not match parameters")
    if names is None:
        names = [f"param{i}" for i in range(len(params))]
    for p, g, name in zip(params, grads, names):
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match {name} "
                             f"shape {p.shape}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    for p, g, m, v in zip(params, grads, state.first, state.second):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization and a positive floor."""
    with np.errstate(invalid="ignore"):  # inf logits surface as NaN output
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=1, keepdims=True)
    return np.maximum(p, PROB_FLOOR)


class Mlp:
    """Fully connected ReLU classifier with a softmax output layer.

    Weights are drawn uniformly from [-sqrt(6/fan_in), sqrt(6/fan_in)] with a
    seeded generator; biases start at zero. The same seed reproduces
    bit-identical parameters.
    """

    def __init__(self, layer_widths: list[int], seed: int):
        widths = list(layer_widths)
        if len(widths) < 2:
            raise ConfigurationError("layer_widths needs at least input and "
                                     "output sizes")
        if any((not isinstance(w, (int, np.integer))) or w <= 0 for w in widths):
            raise ConfigurationError(f"layer widths must be positive integers, "
                                     f"got {widths}")
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.layers: list[DenseLayer] = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            limit = math.sqrt(6.0 / fan_in)
            weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            bias = np.zeros(fan_out)
            activation = LINEAR if i == len(widths) - 2 else RELU
            self.layers.append(DenseLayer(weights, bias, activation))
        self.adam = AdamState(self.parameters())

    @property
    def input_width(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_width(self) -> int:
        return self.layers[-1].weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def parameter_names(self) -> list[str]:
        out = []
        for i in range(len(self.layers)):
            out.append(f"layer{i}.weights")
            out.append(f"layer{i}.bias")
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x) -> ForwardTrace:
        x = check_matrix(x, "x")
        if x.shape[1] != self.input_width:
            raise ShapeError(f"input has {x.shape[1]} columns, network expects "
                             f"{self.input_width}")
        pre, act = [], []
        h = x
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected on p below
            for layer in self.layers:
                z = h @ layer.weights + layer.bias
                pre.append(z)
                h = np.maximum(z, 0.0) if layer.activation == RELU else z
                act.append(h)
        p = softmax(pre[-1])
        if not np.isfinite(p).all():
            raise NumericError("non-finite network output (diverged parameters?)")
        return ForwardTrace(inputs=x, pre_activations=pre, activations=act,
                            probabilities=p)

    def predict_proba(self, x) -> np.ndarray:
        return self.forward(x).probabilities

    def backward(self, trace: ForwardTrace, dloss_dprob) -> list[np.ndarray]:
        """Exact gradients of the upstream loss for every weight and bias.

        ``dloss_dprob`` is the loss gradient with respect to the softmax
        probabilities, one row per example; contributions are summed over the
        batch exactly as the loss sums them.
        """
        dloss_dprob = np.asarray(dloss_dprob, dtype=np.float64)
        p = trace.probabilities
        if dloss_dprob.shape != p.shape:
            raise ShapeError(f"dloss_dprob shape {dloss_dprob.shape} does not "
                             f"match probabilities {p.shape}")
        # softmax Jacobian product: dz_j = p_j * (g_j - sum_k g_k p_k)
        inner = (dloss_dprob * p).sum(axis=1, keepdims=True)
        dz = p * (dloss_dprob - inner)
        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            h_prev = trace.activations[i - 1] if i > 0 else trace.inputs
            grads[2 * i] = h_prev.T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ layer.weights.T
                prev = self.layers[i - 1]
                if prev.activation == RELU:
                    dz = dh * (trace.pre_activations[i - 1] > 0.0)
                else:
                    dz = dh
        return grads

    def adam_step(self, grads: list[np.ndarray], cfg: AdamConfig) -> None:
        adam_step(self.parameters(), grads, self.adam, cfg,
                  self.parameter_names())
