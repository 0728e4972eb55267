"""Minimal dense neural network: bias-free layers, relu hidden units, a
shifted sigmoid output, hand-derived gradients, and an Adam optimizer.

The network maps a feature matrix to one score per row, strictly inside
(0, 1). All layers are linear maps without bias terms, so the whole model
is a chain of matrix products and elementwise nonlinearities; backprop is
a dozen lines and is checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MODEL_FORMAT_VERSION = 1

# Scores are kept strictly inside the open unit interval even where the
# sigmoid saturates at float64 resolution.
_SCORE_MIN = np.nextafter(0.0, 1.0)
_SCORE_MAX = np.nextafter(1.0, 0.0)


def shifted_sigmoid(x):
    """Logistic function shifted right by one: 1 / (1 + e^(1-x)).

    Maps 1 -> 0.5, so a constant zero pre-activation is not a trivial
    midpoint. Computed branch-wise to avoid overflow for large |x| and
    clipped to the open interval (0, 1).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    high = x >= 1.0
    # x >= 1: exponent argument is <= 0, safe to evaluate directly.
    out[high] = 1.0 / (1.0 + np.exp(1.0 - x[high]))
    e = np.exp(x[~high] - 1.0)
    out[~high] = e / (1.0 + e)
    return np.clip(out, _SCORE_MIN, _SCORE_MAX)


def shifted_sigmoid_prime(s):
    """Derivative of the shifted sigmoid w.r.t. its pre-activation,
    expressed through the output value s."""
    return s * (1.0 - s)


@dataclass
class DenseLayer:
    """One fully connected layer. Weights only; no bias vector exists."""

    weights: np.ndarray  # (fan_in, fan_out)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


class MlpNetwork:
    """Relu MLP with a single shifted-sigmoid output unit.

    The layer list is the full parameter set: there are no biases and no
    other state. Forward passes are deterministic functions of (weights,
    input).
    """

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ConfigurationError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ConfigurationError(
                    f"layer width mismatch: {prev.fan_out} -> {nxt.fan_in}"
                )
        if layers[-1].fan_out != 1:
            raise ConfigurationError("output layer must have exactly one unit")
        self.layers = layers

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    def copy(self) -> "MlpNetwork":
        return MlpNetwork([DenseLayer(l.weights.copy()) for l in self.layers])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(l.weights)) for l in self.layers)

    def _check_width(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.input_dim:
            raise ConfigurationError(
                f"expected (n, {self.input_dim}) features, got {features.shape}"
            )
        return features

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Score one batch; returns a vector in (0, 1), one entry per row."""
        return self.forward_cached(features)[0]

    def forward_cached(self, features: np.ndarray):
        """Forward pass that also returns the post-activation cache needed
        by :meth:`backward`."""
        features = self._check_width(features)
        activations = [features]
        h = features
        for layer in self.layers[:-1]:
            h = np.maximum(h @ layer.weights, 0.0)
            activations.append(h)
        scores = shifted_sigmoid(h @ self.layers[-1].weights)[:, 0]
        return scores, (activations, scores)

    def backward(self, cache, score_grad: np.ndarray) -> list[np.ndarray]:
        """Chain-rule gradients of a scalar loss w.r.t. every weight matrix.

        `score_grad` holds dLoss/dscore per row of the cached batch.
        """
        activations, scores = cache
        score_grad = np.asarray(score_grad, dtype=np.float64)
        delta = (score_grad * shifted_sigmoid_prime(scores))[:, None]
        grads: list[np.ndarray] = [np.empty(0)] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            grads[i] = activations[i].T @ delta
            if i > 0:
                delta = (delta @ self.layers[i].weights.T) * (activations[i] > 0)
        return grads

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "layer_shapes": [list(l.weights.shape) for l in self.layers],
            "weights": [l.weights.ravel(order="C").tolist() for l in self.layers],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpNetwork":
        version = payload.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported model format version: {version!r}")
        layers = []
        for shape, flat in zip(payload["layer_shapes"], payload["weights"]):
            w = np.asarray(flat, dtype=np.float64).reshape(shape, order="C")
            if not np.all(np.isfinite(w)):
                raise ConfigurationError("serialized weights contain non-finite values")
            layers.append(DenseLayer(w))
        return cls(layers)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MlpNetwork":
        return cls.from_dict(json.loads(text))


def init_network(
    input_dim: int, hidden: tuple[int, ...] = (100, 100, 100), seed: int = 0
) -> MlpNetwork:
    """Fresh network with fan-in-scaled uniform weights.

    Each matrix is drawn from U(-sqrt(3/fan_in), sqrt(3/fan_in)), giving
    entry variance 1/fan_in. Reproducible: the seed fully determines the
    weights.
    """
    widths = (input_dim, *hidden, 1)
    if any(int(w) <= 0 for w in widths):
        raise ConfigurationError(f"all layer widths must be positive, got {widths}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        limit = np.sqrt(3.0 / fan_in)
        layers.append(DenseLayer(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
    return MlpNetwork(layers)


@dataclass
class AdamState:
    """Adaptive moment estimation with bias correction.

    Moment tensors mirror the weight shapes exactly; `step_count` starts at
    zero and increments once per update.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_network(cls, net: MlpNetwork, learning_rate: float = 1e-3) -> "AdamState":
        state = cls(learning_rate=learning_rate)
        state.first_moments = [np.zeros_like(l.weights) for l in net.layers]
        state.second_moments = [np.zeros_like(l.weights) for l in net.layers]
        return state

    def step(self, net: MlpNetwork, grads: list[np.ndarray]) -> MlpNetwork:
        """Apply one update in place; returns the updated network."""
        if len(grads) != len(net.layers):
            raise ConfigurationError("gradient list does not match layer count")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for i, (layer, g) in enumerate(zip(net.layers, grads)):
            if g.shape != layer.weights.shape:
                raise ConfigurationError(
                    f"gradient shape {g.shape} != weight shape {layer.weights.shape}"
                )
            m = self.first_moments[i]
            v = self.second_moments[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            layer.weights -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)
        return net
