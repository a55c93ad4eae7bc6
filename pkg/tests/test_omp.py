import itertools
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from upa_codebook.array import TWO_PI, UpaConfig, build_dictionary, phase_of, planar_steering, Direction
from upa_codebook.codebook import baseline_allones
from upa_codebook.omp import (
    DegenerateTarget,
    EqualGainVector,
    candidate_count,
    candidate_phase_indices,
    candidate_weight,
    enumerate_candidates,
    omp_batch,
    omp_design,
    omp_trace,
    power_iteration_baseband,
    rayleigh_baseband,
    target_beamformer,
)

seeds = st.integers(0, 2**32 - 1)


def blocks(upa, q_h, q_v, l_h, l_v):
    return (build_dictionary("h", upa.m_h, q_h, l_h).block(1),
            build_dictionary("v", upa.m_v, q_v, l_v).block(1))


def random_pair(rng, l_h, l_v, i=3):
    return (EqualGainVector((0, *rng.integers(0, i, l_h - 1)), i),
            EqualGainVector((0, *rng.integers(0, i, l_v - 1)), i))


def align(a, b):
    """``a`` rotated by the global phase that best matches ``b``."""
    z = np.vdot(a, b)
    return a * (z / abs(z))


def eig_oracle(F, w):
    """Principal generalized eigenvector of (F^H w w^H F, F^H F), scaled to |F v| = 1."""
    A = F.conj().T @ np.outer(w, w.conj()) @ F
    B = F.conj().T @ F
    vals, vecs = scipy.linalg.eigh(A, B)
    v = vecs[:, -1]
    return v / np.linalg.norm(F @ v)


class TestEqualGain:
    def test_first_entry_fixed(self):
        with pytest.raises(ValueError):
            EqualGainVector((1, 0), 3)
        with pytest.raises(ValueError):
            EqualGainVector((0, 3), 3)

    def test_values(self):
        g = EqualGainVector((0, 1, 2), 3)
        np.testing.assert_allclose(g.values, np.exp(1j * TWO_PI * np.array([0, 1, 2]) / 3))
        np.testing.assert_array_equal(EqualGainVector.ones(4).values, np.ones(4))


class TestTarget:
    def test_single_direction(self):
        upa = UpaConfig(4, 3, n_rf=1)
        d_h, d_v = blocks(upa, 2, 2, 1, 1)
        t = target_beamformer(EqualGainVector.ones(1), EqualGainVector.ones(1), d_h, d_v)
        psi_h = build_dictionary("h", 4, 2, 1).directions[0]
        psi_v = build_dictionary("v", 3, 2, 1).directions[0]
        np.testing.assert_allclose(t, planar_steering(upa, Direction(psi_h, psi_v)), atol=1e-12)

    @given(seeds)
    def test_unit_norm(self, seed):
        upa = UpaConfig(12, 6)
        d_h, d_v = blocks(upa, 8, 8, 8, 8)
        g_h, g_v = random_pair(np.random.default_rng(seed), 8, 8)
        assert np.linalg.norm(target_beamformer(g_h, g_v, d_h, d_v)) == pytest.approx(1.0)

    def test_allones_baseline_target(self):
        upa = UpaConfig(12, 6)
        d_h, d_v = blocks(upa, 8, 8, 32, 32)
        t = target_beamformer(EqualGainVector.ones(32), EqualGainVector.ones(32), d_h, d_v)
        direct = omp_design(t, upa, d_h, d_v, EqualGainVector.ones(32), EqualGainVector.ones(32))
        cb = baseline_allones(upa, 8, 8)
        np.testing.assert_allclose(cb.entry(1, 1).composite, direct.composite, atol=1e-12)
        assert cb.stats["candidates_evaluated"] == 1
        assert cb.config.l_h == cb.config.l_v == 32

    def test_block_size_mismatch(self):
        upa = UpaConfig(4, 4, n_rf=1)
        d_h, d_v = blocks(upa, 2, 2, 2, 2)
        with pytest.raises(ValueError):
            target_beamformer(EqualGainVector.ones(3), EqualGainVector.ones(2), d_h, d_v)


class TestRayleigh:
    def test_scalar_case(self, rng):
        f = np.exp(1j * rng.uniform(0, TWO_PI, 8)) / math.sqrt(8)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v, reg = rayleigh_baseband(f[:, None], w)
        z = np.vdot(f, w)
        assert v[0] == pytest.approx(z / abs(z) / np.linalg.norm(f))
        assert not reg

    @given(seeds, st.integers(1, 4), st.integers(4, 72))
    def test_matches_generalized_eigensolver(self, seed, n, m):
        rng = np.random.default_rng(seed)
        F = np.exp(1j * rng.uniform(0, TWO_PI, (m, n))) / math.sqrt(m)
        w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        v, _ = rayleigh_baseband(F, w)
        ref = eig_oracle(F, w)
        cos = abs(np.vdot(F @ v, F @ ref))
        assert cos > 1 - 1e-8
        assert np.linalg.norm(F @ v) == pytest.approx(1.0)
        assert abs(np.vdot(w, F @ v).imag) < 1e-10 and np.vdot(w, F @ v).real > 0

    def test_power_iteration_example(self, rng):
        F = np.exp(1j * rng.uniform(0, TWO_PI, (16, 3))) / 4
        w = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        v, _ = rayleigh_baseband(F, w)
        ref = power_iteration_baseband(F, np.outer(w, w.conj()))
        assert abs(np.vdot(F @ v, F @ ref)) > 1 - 1e-8

    def test_orthogonal_target_is_error(self):
        F = np.zeros((4, 1), dtype=complex)
        F[:2, 0] = 1
        with pytest.raises(DegenerateTarget):
            rayleigh_baseband(F, np.array([0, 0, 1, 1j]))

    def test_duplicate_columns_flagged(self, rng):
        f = np.exp(1j * rng.uniform(0, TWO_PI, 8)) / math.sqrt(8)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v, reg = rayleigh_baseband(np.stack([f, f], axis=1), w)
        assert reg
        assert np.linalg.norm(np.stack([f, f], axis=1) @ v) == pytest.approx(1.0)


class TestOmp:
    upa = UpaConfig(12, 6)

    def test_equal_gain_target_is_exact(self):
        upa = UpaConfig(4, 4, n_rf=1)
        d_h, d_v = blocks(upa, 2, 2, 1, 1)
        g = EqualGainVector.ones(1)
        t = target_beamformer(g, g, d_h, d_v)
        states = omp_trace(t, upa, d_h, d_v, g, g, quantize=False)
        np.testing.assert_allclose(states[-1].analog_so_far @ states[-1].baseband, t, atol=1e-12)
        assert np.linalg.norm(states[-1].residual) < 1e-12

    def test_vanished_residual_keeps_full_width(self):
        upa = UpaConfig(4, 4, n_rf=4)
        d_h, d_v = blocks(upa, 2, 2, 1, 1)
        g = EqualGainVector.ones(1)
        t = target_beamformer(g, g, d_h, d_v)
        bf = omp_design(t, upa, d_h, d_v, g, g, quantize=False)
        assert bf.n_rf == 4
        np.testing.assert_allclose(bf.analog[:, 1:], np.full((16, 3), 0.25))
        assert bf.regularized
        assert abs(np.vdot(t, bf.composite)) == pytest.approx(1.0, abs=1e-6)

    def test_single_column_matches_rounding_oracle(self):
        upa = UpaConfig(12, 6, n_rf=1)
        d_h, d_v = blocks(upa, 8, 8, 8, 8)
        rng = np.random.default_rng(3)
        for _ in range(20):
            g_h, g_v = random_pair(rng, 8, 8)
            t = target_beamformer(g_h, g_v, d_h, d_v)
            bf = omp_design(t, upa, d_h, d_v, g_h, g_v)
            step = TWO_PI / 64
            levels = np.array([np.argmin([abs(np.angle(np.exp(1j * (ph - k * step))))
                                          for k in range(64)]) for ph in phase_of(t)])
            f = np.exp(1j * levels * step) / math.sqrt(upa.m)
            oracle = abs(np.vdot(t, f)) / np.linalg.norm(f)
            assert abs(np.vdot(t, bf.composite)) == pytest.approx(oracle, abs=1e-12)
            assert oracle >= math.cos(math.pi / 64) * np.abs(t).sum() / math.sqrt(upa.m) - 1e-12

    @pytest.mark.parametrize("quantize", [True, False])
    def test_invariants_along_iterations(self, quantize):
        d_h, d_v = blocks(self.upa, 8, 8, 8, 8)
        rng = np.random.default_rng(11)
        for _ in range(100):
            g_h, g_v = random_pair(rng, 8, 8)
            w = candidate_weight(g_h, g_v, d_h, d_v)
            t = w / np.linalg.norm(w)
            states = omp_trace(t, self.upa, d_h, d_v, g_h, g_v, quantize)
            objective = []
            for s in states:
                c = s.analog_so_far @ s.baseband
                assert np.max(np.abs(s.residual - (t - c))) < 1e-12
                assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-12)
                objective.append(abs(np.vdot(w, c)) ** 2)
            assert np.all(np.diff(objective) >= -1e-9 * objective[-1])
            F = states[-1].analog_so_far
            assert np.max(np.abs(np.abs(F) - 1 / math.sqrt(self.upa.m))) < 1e-12
            if quantize:
                x = phase_of(F) / (TWO_PI / 64)
                assert np.max(np.abs(x - np.round(x))) < 1e-9

    def test_batch_matches_single(self):
        d_h, d_v = blocks(self.upa, 8, 8, 8, 8)
        rng = np.random.default_rng(5)
        pairs = [random_pair(rng, 8, 8) for _ in range(6)]
        w = np.array([candidate_weight(a, b, d_h, d_v) for a, b in pairs])
        F, v, _ = omp_batch(w / np.linalg.norm(w, axis=1, keepdims=True), w, 4, 6)
        for k, (a, b) in enumerate(pairs):
            bf = omp_design(w[k] / np.linalg.norm(w[k]), self.upa, d_h, d_v, a, b)
            np.testing.assert_allclose(F[k] @ v[k], bf.composite, atol=1e-12)


class TestEnumeration:
    def test_full_sweep_count(self):
        assert candidate_count(8, 8, 3) == 3**14 == 4_782_969

    def test_single_phase(self):
        pairs = list(enumerate_candidates(4, 3, 1))
        assert len(pairs) == 1
        assert pairs[0][0].phase_indices == (0, 0, 0, 0)

    def test_one_free_phase(self):
        pairs = list(enumerate_candidates(2, 1, 2))
        assert [(a.phase_indices, b.phase_indices) for a, b in pairs] == [((0, 0), (0,)), ((0, 1), (0,))]

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3))
    def test_indexed_matches_lexicographic(self, l_h, l_v, i):
        full = [(a.phase_indices, b.phase_indices) for a, b in enumerate_candidates(l_h, l_v, i)]
        assert len(full) == candidate_count(l_h, l_v, i)
        expected = [((0, *a), (0, *b))
                    for a in itertools.product(range(i), repeat=l_h - 1)
                    for b in itertools.product(range(i), repeat=l_v - 1)]
        assert full == expected
        idx = list(range(0, len(full), 2))
        sub = [(a.phase_indices, b.phase_indices)
               for a, b in enumerate_candidates(l_h, l_v, i, indices=idx)]
        assert sub == full[::2]

    def test_phase_index_split(self):
        ph, pv = candidate_phase_indices([3**7 * 5 + 7], 8, 8, 3)
        assert tuple(ph[0]) == (0, 0, 0, 0, 0, 0, 1, 2)
        assert tuple(pv[0]) == (0, 0, 0, 0, 0, 0, 2, 1)
