import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from upa_codebook.array import (
    PSI_BOUND_V,
    TWO_PI,
    AngleOfDeparture,
    BeamRegion,
    Beamformer,
    ContractError,
    Direction,
    UpaConfig,
    build_dictionary,
    direction_grid,
    pattern_integral,
    pattern_on_axes,
    phase_of,
    planar_steering,
    quantize_phases,
    reference_gain,
    steering_vector,
    wrap_phase,
)

from conftest import random_unit

angles = st.floats(-10.0, 10.0, allow_nan=False)


def nearest_level_oracle(phase, b):
    """Brute-force circular nearest level, ties to the smaller value."""
    levels = TWO_PI * np.arange(2**b) / 2**b
    dist = np.abs(np.angle(np.exp(1j * (phase - levels))))
    return levels[np.flatnonzero(np.isclose(dist, dist.min(), rtol=0, atol=1e-12))[0]]


class TestSteering:
    @pytest.mark.parametrize("m, psi, expected", [
        (2, 0.0, [0.70711, 0.70711]),
        (2, math.pi, [0.70711, -0.70711]),
        (4, math.pi / 2, [0.5, 0.5j, -0.5, -0.5j]),
    ])
    def test_examples(self, m, psi, expected):
        np.testing.assert_allclose(steering_vector(m, psi), expected, atol=1e-5)

    @given(st.integers(1, 64), angles)
    def test_unit_norm(self, m, psi):
        assert abs(np.linalg.norm(steering_vector(m, psi)) - 1.0) < 1e-12

    def test_matrix_form_columns(self):
        psi = np.array([0.1, -1.3, 2.0])
        mat = steering_vector(5, psi)
        assert mat.shape == (5, 3)
        for k in range(3):
            np.testing.assert_allclose(mat[:, k], steering_vector(5, psi[k]))

    def test_rejects_empty_array(self):
        with pytest.raises(ContractError):
            steering_vector(0, 0.0)


class TestPlanar:
    def test_all_zero_phases(self):
        np.testing.assert_allclose(planar_steering(UpaConfig(2, 2, n_rf=1), Direction(0, 0)),
                                   [0.5] * 4)

    def test_horizontal_factor_is_outer(self):
        np.testing.assert_allclose(planar_steering(UpaConfig(2, 2, n_rf=1), Direction(math.pi, 0)),
                                   [0.5, 0.5, -0.5, -0.5], atol=1e-15)

    @given(angles, angles)
    def test_norm_and_periodicity(self, a, b):
        cfg = UpaConfig(4, 3, n_rf=2)
        d = planar_steering(cfg, Direction(a, b))
        assert abs(np.linalg.norm(d) - 1) < 1e-12
        np.testing.assert_allclose(planar_steering(cfg, Direction(a + TWO_PI, b)), d, atol=1e-9)

    def test_direction_wraps(self):
        assert Direction(math.pi, 3 * math.pi).psi_h == pytest.approx(-math.pi)
        assert -math.pi <= Direction(7.0, -7.0).psi_v < math.pi

    def test_aod_ranges(self):
        with pytest.raises(ValueError):
            AngleOfDeparture(math.pi / 2, 0.0)
        with pytest.raises(ValueError):
            AngleOfDeparture(0.0, math.pi / 4)
        d = AngleOfDeparture(math.pi / 6, 0.0).direction()
        assert d.psi_h == pytest.approx(math.pi / 2)
        assert d.psi_v == 0.0


class TestReferenceGain:
    cfg = UpaConfig(2, 2, n_rf=1)

    def test_matched_beam(self):
        d = Direction(0.4, -1.1)
        assert reference_gain(planar_steering(self.cfg, d), d, self.cfg) == pytest.approx(1.0)

    def test_orthogonal_dft_directions(self):
        c = planar_steering(self.cfg, Direction(0, 0))
        assert reference_gain(c, Direction(math.pi, 0), self.cfg) == pytest.approx(0.0, abs=1e-15)

    def test_requires_unit_norm(self):
        with pytest.raises(ContractError):
            reference_gain(np.ones(4), Direction(0, 0), self.cfg)

    @given(st.integers(0, 2**32 - 1), angles, angles)
    def test_bounded_by_one(self, seed, a, b):
        cfg = UpaConfig(3, 4, n_rf=1)
        c = random_unit(np.random.default_rng(seed), cfg.m)
        assert 0.0 <= reference_gain(c, Direction(a, b), cfg) <= 1.0 + 1e-12

    def test_pattern_on_axes_matches_pointwise(self, rng):
        cfg = UpaConfig(3, 2, n_rf=1)
        c = random_unit(rng, cfg.m)
        ph, pv = np.array([0.3, -2.0]), np.array([1.0, 0.0, -0.5])
        grid = pattern_on_axes(c, cfg, ph, pv)
        for i, a in enumerate(ph):
            for j, b in enumerate(pv):
                assert grid[i, j] == pytest.approx(reference_gain(c, Direction(a, b), cfg))

    def test_energy_integral(self, rng):
        cfg = UpaConfig(12, 6)
        for _ in range(5):
            val = pattern_integral(random_unit(rng, cfg.m), cfg, resolution=512)
            assert val == pytest.approx(TWO_PI**2 / cfg.m, rel=5e-3)


class TestDirectionGrid:
    def test_first_entry(self):
        assert direction_grid("h", 8, 2)[0] == pytest.approx(-2.9452, abs=1e-4)

    def test_single_midpoint(self):
        np.testing.assert_allclose(direction_grid("h", 1, 1), [0.0], atol=1e-15)

    def test_vertical_beam_width(self):
        g = direction_grid("v", 4, 2)
        assert g[2] - g[0] == pytest.approx(math.pi / (2 * math.sqrt(2)), abs=1e-4)
        assert len(g) == 8

    @given(st.sampled_from("hv"), st.integers(1, 16), st.integers(1, 16))
    def test_inside_sector_and_sorted(self, axis, q, l):
        g = direction_grid(axis, q, l)
        bound = math.pi if axis == "h" else PSI_BOUND_V
        assert len(g) == q * l
        assert np.all(np.diff(g) > 0) and g[0] > -bound and g[-1] < bound


class TestDictionary:
    def test_horizontal_tight_frame(self):
        d = build_dictionary("h", 12, 8, 8)
        gram = d.columns @ d.columns.conj().T
        np.testing.assert_allclose(gram, (64 / 12) * np.eye(12), atol=1e-9)
        assert d.gram_deviation() < 1e-9

    def test_trivial(self):
        np.testing.assert_allclose(build_dictionary("h", 1, 1, 1).columns, [[1.0]])

    def test_vertical_deviation_matches_direct_product(self):
        d = build_dictionary("v", 6, 8, 8)
        cols = np.exp(1j * np.outer(np.arange(6), direction_grid("v", 8, 8))) / math.sqrt(6)
        direct = np.linalg.norm(cols @ cols.conj().T - (64 / 6) * np.eye(6), 2)
        assert d.gram_deviation() == pytest.approx(direct)
        assert d.gram_deviation() > 1e-3

    def test_block(self):
        d = build_dictionary("h", 12, 8, 8)
        np.testing.assert_array_equal(d.block(2), d.columns[:, 8:16])
        with pytest.raises(IndexError):
            d.block(9)


class TestQuantize:
    @pytest.mark.parametrize("b, phase, expected", [
        (2, 0.8, math.pi / 2),
        (6, TWO_PI / 64, TWO_PI / 64),
        (1, math.pi / 2, 0.0),
    ])
    def test_examples(self, b, phase, expected):
        out = quantize_phases(np.array([np.exp(1j * phase)]), b)
        assert phase_of(out)[0] == pytest.approx(expected, abs=1e-12)

    def test_top_tie_wraps_to_zero(self):
        # 3pi/2 + pi/4 is equidistant from 3pi/2 and 2pi == 0 at B=2
        out = quantize_phases(np.array([np.exp(1j * 7 * math.pi / 4)]), 2)
        assert phase_of(out)[0] == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(0, TWO_PI, exclude_max=True), st.integers(1, 8))
    def test_matches_nearest_search(self, phase, b):
        out = phase_of(quantize_phases(np.array([np.exp(1j * phase)]), b))[0]
        got = np.exp(1j * out)
        want = np.exp(1j * nearest_level_oracle(phase_of(np.exp(1j * phase)), b))
        assert abs(got - want) < 1e-9

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_idempotent_and_keeps_modulus(self, seed, b):
        rng = np.random.default_rng(seed)
        F = rng.uniform(0.1, 2, (5, 3)) * np.exp(1j * rng.uniform(0, TWO_PI, (5, 3)))
        once = quantize_phases(F, b)
        np.testing.assert_allclose(quantize_phases(once, b), once, atol=1e-12)
        np.testing.assert_allclose(np.abs(once), np.abs(F))


class TestRegion:
    def test_half_open(self):
        r = BeamRegion(0.0, 1.0, 0.0, 1.0)
        assert r.contains(0.0, 0.5, periodic=False)
        assert not r.contains(1.0, 0.5, periodic=False)

    def test_periodic_wrap(self):
        r = BeamRegion(-math.pi - 0.2, -math.pi + 0.5, 0.0, 1.0)
        assert r.contains(math.pi - 0.1, 0.5)
        assert not r.contains(math.pi - 0.1, 0.5, periodic=False)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            BeamRegion(1.0, 1.0, 0.0, 1.0)


def test_wrap_phase_range():
    x = wrap_phase(np.linspace(-20, 20, 1001))
    assert np.all(x >= -math.pi) and np.all(x < math.pi)


def test_beamformer_is_read_only():
    bf = Beamformer(np.ones((4, 2)) / 2, [1, 0])
    with pytest.raises(ValueError):
        bf.analog[0, 0] = 0
    np.testing.assert_allclose(bf.composite, np.full(4, 0.5))
    assert bf.analog_magnitude_error() == 0.0


def test_upa_config_validation():
    with pytest.raises(ValueError):
        UpaConfig(2, 2, n_rf=5)
    with pytest.raises(ValueError):
        UpaConfig(0, 2)
    assert UpaConfig(12, 6).m == 72
