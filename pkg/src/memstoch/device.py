"""Single memristive device with quantized, unidirectional, noisy programming.

Conductance is kept continuous. Programming moves it up by ``overlaps * B``
plus one Gaussian error draw, then clamps to ``[g_min, g_max]``. Reset snaps
it to the nearest nominal level without noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)


class DeviceConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    """Device geometry and programming variability.

    Attributes:
        num_levels: number of nominal conductance states.
        on_off_ratio: ``g_max / g_min``.
        g_max: top conductance (normalized units).
        sigma_ratio: programming-noise std as a fraction of the level spacing.
    """

    num_levels: int = 32
    on_off_ratio: float = 15.0
    g_max: float = 1.0
    sigma_ratio: float = 0.0

    def __post_init__(self):
        if self.num_levels < 2:
            raise DeviceConfigError(f"num_levels must be >= 2, got {self.num_levels}")
        if not self.on_off_ratio > 1.0:
            raise DeviceConfigError(f"on_off_ratio must be > 1, got {self.on_off_ratio}")
        if not self.g_max > 0.0:
            raise DeviceConfigError(f"g_max must be > 0, got {self.g_max}")
        if self.sigma_ratio < 0.0:
            raise DeviceConfigError(f"sigma_ratio must be >= 0, got {self.sigma_ratio}")

    @property
    def g_min(self) -> float:
        return self.g_max / self.on_off_ratio

    @property
    def step(self) -> float:
        """Level spacing ``B``: conductance gained per pulse-pair overlap."""
        return (self.g_max - self.g_min) / (self.num_levels - 1)

    @property
    def sigma(self) -> float:
        return self.sigma_ratio * self.step

    @property
    def swing(self) -> float:
        return self.g_max - self.g_min


def derive_geometry(params: DeviceParams) -> tuple[float, float, float]:
    """Return ``(g_min, B, sigma)`` for a parameter set."""
    return params.g_min, params.step, params.sigma


@dataclass(frozen=True)
class DeviceState:
    conductance: float
    saturation_events: int = 0
    reset_clamps: int = 0


def nearest_level(g, params: DeviceParams):
    """Snap conductance(s) to the closest nominal level inside the range."""
    idx = np.clip(np.rint((np.asarray(g, dtype=float) - params.g_min) / params.step),
                  0, params.num_levels - 1)
    out = params.g_min + idx * params.step
    return float(out) if np.ndim(out) == 0 else out


def program(state: DeviceState, overlaps: int, params: DeviceParams,
            rng: np.random.Generator | None = None) -> DeviceState:
    """Apply ``overlaps`` coincident pulse pairs to one device."""
    if overlaps < 0:
        raise ValueError("overlaps must be >= 0")
    if overlaps == 0:
        return state
    noise = 0.0
    if params.sigma > 0.0:
        if rng is None:
            raise ValueError("a generator is required when sigma > 0")
        noise = rng.normal(0.0, params.sigma)
    target = state.conductance + overlaps * params.step + noise
    g = min(max(target, params.g_min), params.g_max)
    sat = state.saturation_events + (target > params.g_max)
    return replace(state, conductance=g, saturation_events=sat)


def reset(state: DeviceState, target: float, params: DeviceParams) -> DeviceState:
    clamps = state.reset_clamps
    if target < params.g_min or target > params.g_max:
        log.warning("reset target %.6g outside [%.6g, %.6g]; clamping",
                    target, params.g_min, params.g_max)
        clamps += 1
    return replace(state, conductance=nearest_level(target, params), reset_clamps=clamps)


def program_array(g: np.ndarray, overlaps: np.ndarray, params: DeviceParams,
                  rng: np.random.Generator | None = None) -> int:
    """Vectorized :func:`program` applied in place to a conductance array.

    One noise draw per device that receives at least one overlap. Returns the
    number of programming events that hit the ``g_max`` ceiling.
    """
    idx = np.flatnonzero(overlaps)
    if idx.size == 0:
        return 0
    flat = g.reshape(-1)
    target = flat[idx] + overlaps.reshape(-1)[idx] * params.step
    if params.sigma > 0.0:
        target += rng.normal(0.0, params.sigma, size=idx.size)
    saturated = int(np.count_nonzero(target > params.g_max))
    flat[idx] = np.clip(target, params.g_min, params.g_max)
    return saturated
