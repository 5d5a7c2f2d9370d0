import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memstoch.device import (
    DeviceConfigError,
    DeviceParams,
    DeviceState,
    derive_geometry,
    nearest_level,
    program,
    program_array,
    reset,
)

DEFAULT = DeviceParams(num_levels=32, on_off_ratio=15.0, g_max=1.0)


class TestGeometry:
    def test_default_device(self):
        g_min, step, sigma = derive_geometry(DEFAULT)
        # 1/15 and (14/15)/31 = 14/465
        assert g_min == pytest.approx(0.0666666666667, abs=1e-12)
        assert step == pytest.approx(0.0301075268817, abs=1e-12)
        assert sigma == 0.0

    def test_two_level_device(self):
        g_min, step, _ = derive_geometry(DeviceParams(num_levels=2, on_off_ratio=2.0))
        assert (g_min, step) == (0.5, 0.5)

    def test_sigma_is_fraction_of_step(self):
        _, _, sigma = derive_geometry(DeviceParams(sigma_ratio=0.1))
        assert sigma == pytest.approx(0.00301075268817, abs=1e-12)

    @pytest.mark.parametrize("kw", [dict(num_levels=1), dict(on_off_ratio=1.0),
                                    dict(sigma_ratio=-0.1), dict(g_max=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(DeviceConfigError):
            DeviceParams(**kw)


class TestProgram:
    def test_zero_overlaps_is_identity(self):
        s = DeviceState(0.4)
        assert program(s, 0, DeviceParams(sigma_ratio=1.0), np.random.default_rng(0)) is s

    def test_two_overlaps_from_bottom(self):
        s = program(DeviceState(DEFAULT.g_min), 2, DEFAULT)
        assert s.conductance == pytest.approx(DEFAULT.g_min + 2 * DEFAULT.step, abs=1e-15)

    def test_saturation_clamps_and_counts(self):
        s = program(DeviceState(DEFAULT.g_max), 5, DEFAULT)
        assert s.conductance == DEFAULT.g_max
        assert s.saturation_events == 1

    def test_negative_overlaps_rejected(self):
        with pytest.raises(ValueError):
            program(DeviceState(DEFAULT.g_min), -1, DEFAULT)

    def test_noise_moments(self):
        params = DeviceParams(sigma_ratio=0.3)
        b = params.step
        g0 = np.full(10**5, params.g_min)
        g = g0.copy()
        program_array(g, np.ones_like(g, dtype=np.int64), params, np.random.default_rng(8))
        gain = g - g0
        assert abs(gain.mean() - b) < 5 * 0.3 * b / np.sqrt(1e5)
        assert gain.std() == pytest.approx(0.3 * b, rel=0.02)

    def test_scalar_and_array_paths_agree(self):
        params = DeviceParams(sigma_ratio=0.5)
        g = np.array([params.g_min + 3 * params.step])
        program_array(g, np.array([2]), params, np.random.default_rng(1))
        s = program(DeviceState(params.g_min + 3 * params.step), 2, params, np.random.default_rng(1))
        assert g[0] == pytest.approx(s.conductance, abs=1e-15)


class TestReset:
    def test_bottom(self):
        assert reset(DeviceState(0.5), DEFAULT.g_min, DEFAULT).conductance == DEFAULT.g_min

    @pytest.mark.parametrize("levels,expect", [(1.4, 1), (1.6, 2), (0.49, 0), (2.51, 3),
                                               (30.2, 30), (7.0, 7)])
    def test_nearest_level(self, levels, expect):
        target = DEFAULT.g_min + levels * DEFAULT.step
        got = reset(DeviceState(0.5), target, DEFAULT).conductance
        assert got == pytest.approx(DEFAULT.g_min + expect * DEFAULT.step, abs=1e-15)

    def test_above_range_clamps_and_counts(self):
        s = reset(DeviceState(0.5), DEFAULT.g_max + 0.1, DEFAULT)
        assert s.conductance == pytest.approx(DEFAULT.g_max)
        assert s.reset_clamps == 1


def test_levels_reachable_by_single_overlaps():
    g = DeviceState(DEFAULT.g_min)
    seen = {round(g.conductance, 12)}
    for _ in range(100):
        g = program(g, 1, DEFAULT)
        seen.add(round(g.conductance, 12))
    assert len(seen) == DEFAULT.num_levels
    grid = {round(x, 12) for x in DEFAULT.g_min + DEFAULT.step * np.arange(DEFAULT.num_levels)}
    assert seen == grid


@given(st.lists(st.tuples(st.sampled_from(["program", "reset"]), st.integers(0, 40),
                          st.floats(-1.0, 2.0)), max_size=60),
       st.floats(0.0, 3.0), st.integers(0, 1000))
def test_bounded_under_any_sequence(ops, sigma_ratio, seed):
    params = DeviceParams(sigma_ratio=sigma_ratio)
    rng = np.random.default_rng(seed)
    s = DeviceState(params.g_min)
    for op, n, target in ops:
        s = program(s, n, params, rng) if op == "program" else reset(s, target, params)
        assert params.g_min <= s.conductance <= params.g_max


@given(st.floats(0.0667, 1.0), st.integers(0, 50))
def test_noiseless_program_is_monotone_and_pure(g0, n):
    g0 = min(max(g0, DEFAULT.g_min), DEFAULT.g_max)
    a = program(DeviceState(g0), n, DEFAULT)
    b = program(DeviceState(g0), n, DEFAULT)
    assert a == b
    assert a.conductance >= g0


def test_nearest_level_vectorized():
    g = DEFAULT.g_min + DEFAULT.step * np.array([-3.0, 0.2, 5.5001, 40.0])
    np.testing.assert_allclose(nearest_level(g, DEFAULT),
                               DEFAULT.g_min + DEFAULT.step * np.array([0, 0, 6, 31]))
