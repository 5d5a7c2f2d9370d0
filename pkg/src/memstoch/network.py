"""Fully connected sigmoid/softmax network, float and stochastic variants.

Weight matrices are stored ``(fan_in, fan_out)`` so a layer computes
``z = x @ W``. No biases anywhere: a crossbar would need an extra constant
input row, and the float baseline omits them too so both variants have the
same parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .crossbar import CrossbarLayer, WeightInit, init_layer
from .device import DeviceParams
from .stochastic import coincidence_matrix, encode_bits, sample_decoded


@dataclass(frozen=True)
class Topology:
    layer_sizes: tuple[int, ...] = (784, 256, 128, 10)
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("topology needs at least an input and an output layer")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.hidden_activation != "sigmoid" or self.output_activation != "softmax":
            raise ValueError("only sigmoid hidden / softmax output layers are supported")

    @property
    def shapes(self) -> list[tuple[int, int]]:
        s = self.layer_sizes
        return list(zip(s[:-1], s[1:]))

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def glorot_scale(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def cross_entropy(probs: np.ndarray, label: int) -> float:
    return float(-np.log(max(probs[label], 1e-300)))


@dataclass
class FloatNetwork:
    weights: list[np.ndarray]
    topology: Topology = field(default_factory=Topology)

    @classmethod
    def initialize(cls, topology: Topology, rng: np.random.Generator,
                   init_scale: float | None = None) -> "FloatNetwork":
        weights = []
        for fan_in, fan_out in topology.shapes:
            r = init_scale if init_scale is not None else glorot_scale(fan_in, fan_out)
            weights.append(rng.uniform(-r, r, size=(fan_in, fan_out)))
        return cls(weights, topology)

    def read_weights(self) -> list[np.ndarray]:
        return self.weights


def _check_input(x: np.ndarray, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n_in:
        raise ValueError(f"input has {x.shape[-1]} features, network expects {n_in}")
    return x


def forward_float(net, x) -> list[np.ndarray]:
    """Activations of every layer, input first.

    ``x`` may be a single vector or a ``(batch, features)`` matrix.
    """
    weights = net.read_weights() if not isinstance(net, list) else net
    acts = [_check_input(x, weights[0].shape[0])]
    for k, w in enumerate(weights):
        z = acts[-1] @ w
        acts.append(softmax(z) if k == len(weights) - 1 else sigmoid(z))
    return acts


def output_delta(probs: np.ndarray, label: int) -> np.ndarray:
    n = probs.shape[-1]
    if not 0 <= label < n:
        raise ValueError(f"label {label} outside [0, {n})")
    d = probs.copy()
    d[label] -= 1.0
    return d


def backprop_deltas(weights: Sequence[np.ndarray], acts: Sequence[np.ndarray],
                    label: int) -> list[np.ndarray]:
    """Error terms for each layer's outputs (softmax + cross-entropy at the top)."""
    deltas = [output_delta(acts[-1], label)]
    for k in range(len(weights) - 1, 0, -1):
        a = acts[k]
        deltas.append((weights[k] @ deltas[-1]) * a * (1.0 - a))
    deltas.reverse()
    return deltas


def backward_float(net, acts: Sequence[np.ndarray], label: int):
    """Return ``(deltas, gradients)``; ``gradients[k]`` matches ``weights[k]``."""
    weights = net.read_weights() if not isinstance(net, list) else net
    deltas = backprop_deltas(weights, acts, label)
    grads = [np.outer(acts[k], deltas[k]) for k in range(len(weights))]
    return deltas, grads


def sgd_step_float(net: FloatNetwork, gradients: Sequence[np.ndarray], eta: float) -> FloatNetwork:
    for w, g in zip(net.weights, gradients):
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != weight shape {w.shape}")
        w -= eta * g
    return net


def loss_float(net, x, label: int) -> float:
    return cross_entropy(forward_float(net, x)[-1], label)


# --- stochastic variant -----------------------------------------------------


@dataclass
class IdealLayer:
    """Floating-point weights updated by coincidence counts.

    Each overlap moves a weight by ``quantum``; there is no level structure,
    saturation or programming noise.
    """

    weights: np.ndarray
    quantum: float = 0.01
    update_counter: int = 0
    saturation_events: int = 0
    reset_count: int = 0

    @property
    def shape(self):
        return self.weights.shape

    def read_weights(self) -> np.ndarray:
        return self.weights

    def stochastic_update(self, x_bits, d_bits, delta_signs, rng=None) -> np.ndarray:
        counts = coincidence_matrix(x_bits, d_bits)
        self.weights += self.quantum * counts * np.sign(delta_signs)[None, :]
        self.update_counter += 1
        return counts

    def periodic_reset(self) -> None:
        self.update_counter = 0
        self.reset_count += 1


def layer_quantum(layer) -> float:
    """Weight change produced by one row/column coincidence."""
    if isinstance(layer, CrossbarLayer):
        return layer.weight_scale * layer.params.step
    return layer.quantum


@dataclass
class StochasticNetwork:
    layers: list
    topology: Topology = field(default_factory=Topology)
    bl_train: int = 10
    bl_infer: int = 10

    def __post_init__(self):
        if self.bl_train < 1 or self.bl_infer < 1:
            raise ValueError("bit lengths must be >= 1")
        for layer, shape in zip(self.layers, self.topology.shapes):
            if tuple(layer.shape) != shape:
                raise ValueError(f"layer shape {layer.shape} != topology {shape}")

    @property
    def memristive(self) -> bool:
        return isinstance(self.layers[0], CrossbarLayer)

    @classmethod
    def memristive_from(cls, weights: Sequence[np.ndarray], params: DeviceParams,
                        w_max: float = 1.0, **kw) -> "StochasticNetwork":
        layers = []
        for w in weights:
            layer = CrossbarLayer.zeros(*w.shape, params, w_max)
            layer.encode_weights(w)
            layers.append(layer)
        topo = Topology(tuple([weights[0].shape[0]] + [w.shape[1] for w in weights]))
        return cls(layers, topo, **kw)

    @classmethod
    def initialize(cls, topology: Topology, rng: np.random.Generator,
                   params: DeviceParams | None = None, w_max: float = 1.0,
                   init_scale: float | None = None, **kw) -> "StochasticNetwork":
        """Glorot-uniform start; crossbar layers if ``params`` is given, else ideal."""
        layers = []
        for fan_in, fan_out in topology.shapes:
            r = init_scale if init_scale is not None else glorot_scale(fan_in, fan_out)
            if params is None:
                layers.append(IdealLayer(rng.uniform(-r, r, size=(fan_in, fan_out))))
            else:
                layers.append(init_layer(fan_in, fan_out, params,
                                         WeightInit("uniform", min(r, w_max)), rng, w_max))
        return cls(layers, topology, **kw)

    def read_weights(self) -> list[np.ndarray]:
        return [layer.read_weights() for layer in self.layers]

    def periodic_reset(self) -> None:
        for layer in self.layers:
            layer.periodic_reset()

    @property
    def saturation_events(self) -> int:
        return sum(layer.saturation_events for layer in self.layers)


def forward_stochastic(net: StochasticNetwork, x, bl: int, rng: np.random.Generator,
                       weights: Sequence[np.ndarray] | None = None) -> list[np.ndarray]:
    """Forward pass where every layer input is read as a decoded ``bl``-bit stream.

    Inputs are clamped to [0, 1] before encoding (hidden sigmoid outputs are
    already in range). Returned activations are the full-precision layer
    outputs, input first; the quantized values only feed the weighted sums.
    """
    weights = net.read_weights() if weights is None else weights
    x = np.clip(_check_input(x, weights[0].shape[0]), 0.0, 1.0)
    acts = [x]
    for k, w in enumerate(weights):
        z = sample_decoded(acts[-1], bl, rng) @ w
        acts.append(softmax(z) if k == len(weights) - 1 else sigmoid(z))
    return acts


@dataclass
class LayerStreams:
    x_bits: np.ndarray
    delta_bits: np.ndarray
    signs: np.ndarray
    delta_prob: np.ndarray


def backward_stochastic(net: StochasticNetwork, acts: Sequence[np.ndarray], label: int,
                        rng: np.random.Generator, eta: float, bl: int | None = None,
                        weights: Sequence[np.ndarray] | None = None,
                        x_gain: float = 1.0) -> list[LayerStreams]:
    """Row/column update streams for every layer.

    Deltas come from the full-precision recursion over the current read
    weights. Column ``j`` gets a stream of probability ``clamp(C*|delta_j|)``
    and sign ``-sign(delta_j)`` (descent), rows get ``clamp(x_gain*x_i)``.
    ``C = eta / (quantum * BL * x_gain)`` so the expected weight change is
    ``-eta * x_i * delta_j`` whenever no clamp is active.
    """
    bl = net.bl_train if bl is None else bl
    weights = net.read_weights() if weights is None else weights
    deltas = backprop_deltas(weights, acts, label)
    out = []
    for k, layer in enumerate(net.layers):
        c = eta / (layer_quantum(layer) * bl * x_gain)
        d = deltas[k]
        p_delta = np.minimum(c * np.abs(d), 1.0)
        p_x = np.clip(x_gain * acts[k], 0.0, 1.0)
        out.append(LayerStreams(encode_bits(p_x, bl, rng), encode_bits(p_delta, bl, rng),
                                -np.sign(d), p_delta))
    return out


def apply_stochastic_update(net: StochasticNetwork, streams: Sequence[LayerStreams],
                            device_rng: np.random.Generator | None = None) -> None:
    for layer, s in zip(net.layers, streams):
        layer.stochastic_update(s.x_bits, s.delta_bits, s.signs, device_rng)


def predict(net, x, mode: str = "float", bl: int = 10,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Argmax class for each row of ``x``."""
    if mode == "float":
        probs = forward_float(net, x)[-1]
    else:
        probs = forward_stochastic(net, x, bl, rng)[-1]
    return np.argmax(probs, axis=-1)
