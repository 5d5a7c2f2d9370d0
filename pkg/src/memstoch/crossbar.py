"""Crossbar of two-device synapses.

Each weight is ``w = alpha * (g_plus - g_minus)``. Devices only ever move up,
so a positive update programs ``g_plus`` and a negative one programs
``g_minus``. Every few images the pairs are re-encoded onto low conductances
(:meth:`CrossbarLayer.periodic_reset`) to keep headroom.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .device import DeviceConfigError, DeviceParams, DeviceState, nearest_level, program_array
from .stochastic import BernoulliStream, StreamLengthError, coincidence_matrix


@dataclass(frozen=True)
class SynapsePair:
    g_plus: DeviceState
    g_minus: DeviceState

    @property
    def g_eff(self) -> float:
        return self.g_plus.conductance - self.g_minus.conductance


@dataclass(frozen=True)
class WeightInit:
    """Initial signed-weight distribution: ``"zeros"`` or ``"uniform"`` on [-scale, scale]."""

    kind: str = "uniform"
    scale: float = 0.1


def _as_bits(streams) -> np.ndarray:
    if isinstance(streams, np.ndarray):
        return streams
    streams = list(streams)
    if streams and isinstance(streams[0], BernoulliStream):
        lengths = {s.length for s in streams}
        if len(lengths) > 1:
            raise StreamLengthError(f"mixed stream lengths {sorted(lengths)}")
        return np.stack([s.bits for s in streams])
    return np.asarray(streams, dtype=np.uint8)


@dataclass
class CrossbarLayer:
    g_plus: np.ndarray
    g_minus: np.ndarray
    params: DeviceParams
    weight_scale: float
    update_counter: int = 0
    saturation_events: int = 0
    reset_count: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.g_plus.shape

    @property
    def w_max(self) -> float:
        return self.weight_scale * self.params.swing

    @classmethod
    def zeros(cls, fan_in: int, fan_out: int, params: DeviceParams,
              w_max: float = 1.0) -> "CrossbarLayer":
        if fan_in < 1 or fan_out < 1:
            raise ValueError("layer dimensions must be >= 1")
        g = np.full((fan_in, fan_out), params.g_min)
        return cls(g.copy(), g.copy(), params, w_max / params.swing)

    def encode_weights(self, w: np.ndarray) -> None:
        """Program the pairs to the nearest-level encoding of ``w`` (noiseless)."""
        w = np.asarray(w, dtype=float)
        if w.shape != self.shape:
            raise ValueError(f"weight shape {w.shape} != layer shape {self.shape}")
        if np.any(np.abs(w) > self.w_max * (1 + 1e-12)):
            raise DeviceConfigError(
                f"|w| up to {np.abs(w).max():.4g} exceeds representable {self.w_max:.4g}")
        self._encode_eff(w / self.weight_scale)

    def _encode_eff(self, g_eff: np.ndarray) -> None:
        p = self.params
        mag = nearest_level(p.g_min + np.abs(g_eff), p)
        pos = g_eff >= 0
        self.g_plus = np.where(pos, mag, p.g_min)
        self.g_minus = np.where(pos, p.g_min, mag)

    def read_weights(self) -> np.ndarray:
        return self.weight_scale * (self.g_plus - self.g_minus)

    def pair(self, i: int, j: int) -> SynapsePair:
        return SynapsePair(DeviceState(float(self.g_plus[i, j])),
                           DeviceState(float(self.g_minus[i, j])))

    def stochastic_update(self, x_streams, delta_streams, delta_signs,
                          rng: np.random.Generator | None = None) -> np.ndarray:
        """Coincidence update of every synapse from shared row/column streams.

        ``x_streams`` holds one stream per row and ``delta_streams`` one per
        column, either as ``BernoulliStream`` sequences or unpacked
        ``(n, BL)`` 0/1 arrays. ``delta_signs[j] > 0`` asks column ``j`` to
        increase its weights (program ``g_plus``); ``< 0`` programs
        ``g_minus``; 0 leaves it alone. Returns the overlap-count matrix.
        """
        x_bits = _as_bits(x_streams)
        d_bits = _as_bits(delta_streams)
        fan_in, fan_out = self.shape
        if x_bits.shape[0] != fan_in or d_bits.shape[0] != fan_out:
            raise ValueError(
                f"stream counts ({x_bits.shape[0]}, {d_bits.shape[0]}) "
                f"do not match layer {self.shape}")
        counts = coincidence_matrix(x_bits, d_bits)
        signs = np.sign(np.asarray(delta_signs))
        sat = program_array(self.g_plus, counts * (signs > 0), self.params, rng)
        sat += program_array(self.g_minus, counts * (signs < 0), self.params, rng)
        self.saturation_events += sat
        self.update_counter += 1
        return counts

    def periodic_reset(self) -> None:
        """Re-encode every pair onto ``(g_min + |g_eff|, g_min)`` at nominal levels."""
        self._encode_eff(self.g_plus - self.g_minus)
        self.update_counter = 0
        self.reset_count += 1

    def snapshot(self) -> dict:
        return {
            "params": asdict(self.params),
            "weight_scale": self.weight_scale,
            "g_plus": self.g_plus,
            "g_minus": self.g_minus,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "CrossbarLayer":
        return cls(np.array(snap["g_plus"], dtype=float), np.array(snap["g_minus"], dtype=float),
                   DeviceParams(**snap["params"]), float(snap["weight_scale"]))

    def to_json(self) -> str:
        snap = self.snapshot()
        snap["g_plus"] = self.g_plus.tolist()
        snap["g_minus"] = self.g_minus.tolist()
        return json.dumps(snap)

    @classmethod
    def from_json(cls, text: str) -> "CrossbarLayer":
        return cls.from_snapshot(json.loads(text))


def init_layer(fan_in: int, fan_out: int, params: DeviceParams,
               init: WeightInit = WeightInit(), rng: np.random.Generator | None = None,
               w_max: float = 1.0) -> CrossbarLayer:
    """New crossbar whose pairs encode weights drawn from ``init``."""
    layer = CrossbarLayer.zeros(fan_in, fan_out, params, w_max)
    if init.kind == "zeros":
        return layer
    if init.kind != "uniform":
        raise DeviceConfigError(f"unknown weight init {init.kind!r}")
    if init.scale > layer.w_max:
        raise DeviceConfigError(
            f"init scale {init.scale} exceeds representable weight {layer.w_max}")
    rng = rng if rng is not None else np.random.default_rng()
    layer.encode_weights(rng.uniform(-init.scale, init.scale, size=(fan_in, fan_out)))
    return layer
