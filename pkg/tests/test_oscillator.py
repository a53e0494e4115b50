"""Harmonic propagation in the Gram eigenbasis."""

import numpy as np
import pytest

from gramkit import oscillator, spectral
from gramkit.errors import DimensionMismatch, RankTooLarge

X_DIAG = np.array([[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]])


class TestSingleMode:
    def test_quarter_period(self):
        state = oscillator.OscillatorState(p=np.array([0.0]), q=np.array([1.0]))
        g = np.array([[1.0]])
        out = oscillator.propagate(state, g, np.pi / 2.0)
        assert out.p[0] == pytest.approx(-1.0, abs=1e-12)
        assert out.q[0] == pytest.approx(0.0, abs=1e-12)
        assert out.t == pytest.approx(np.pi / 2.0)

    def test_full_period_returns_start(self):
        lam = 1.7
        g = np.array([[lam * lam]])
        state = oscillator.OscillatorState(p=np.array([0.3]), q=np.array([-0.8]))
        out = oscillator.propagate(state, g, 2.0 * np.pi / lam)
        assert abs(out.p[0] - 0.3) < 1e-9
        assert abs(out.q[0] + 0.8) < 1e-9

    def test_zero_frequency_drifts(self):
        g = np.array([[0.0]])
        state = oscillator.OscillatorState(p=np.array([2.0]), q=np.array([1.0]))
        out = oscillator.propagate(state, g, 3.0)
        assert out.p[0] == 2.0
        assert out.q[0] == pytest.approx(7.0)


class TestEnergyConservation:
    def test_composed_random_steps(self):
        rng = np.random.default_rng(111)
        x = rng.standard_normal((6, 4))
        g = x.T @ x
        state = oscillator.OscillatorState(
            p=rng.standard_normal(4), q=rng.standard_normal(4)
        )
        e0 = oscillator.hamiltonian(state, g)
        for dt in rng.uniform(0.01, 0.3, size=50):
            state = oscillator.propagate(state, g, float(dt))
        assert abs(oscillator.hamiltonian(state, g) - e0) < 1e-10 * e0

    def test_rank_deficient_gram(self):
        """Null directions of the Gram drift freely but the quadratic
        energy never sees them, so conservation still holds."""
        x = np.array([[1.0, 1.0, 0.0]])
        g = x.T @ x
        rng = np.random.default_rng(112)
        state = oscillator.OscillatorState(
            p=rng.standard_normal(3), q=rng.standard_normal(3)
        )
        e0 = oscillator.hamiltonian(state, g)
        for _ in range(20):
            state = oscillator.propagate(state, g, 0.1)
        assert abs(oscillator.hamiltonian(state, g) - e0) < 1e-10 * max(e0, 1.0)


class TestNormalModes:
    def test_mode_energy_matches_hamiltonian(self):
        rng = np.random.default_rng(113)
        x = rng.standard_normal((9, 4))
        f = spectral.svd(x)
        assert f.m_rank == 4
        state = oscillator.OscillatorState(
            p=rng.standard_normal(4), q=rng.standard_normal(4)
        )
        p_modes, q_modes = oscillator.normal_modes(state, f)
        mode_energy = 0.5 * np.sum(p_modes**2) \
            + 0.5 * np.sum((f.lambdas * q_modes) ** 2)
        assert mode_energy == pytest.approx(
            oscillator.hamiltonian(state, x.T @ x), rel=1e-12
        )

    def test_state_length_guard(self):
        f = spectral.svd(X_DIAG)
        state = oscillator.OscillatorState(p=np.zeros(3), q=np.zeros(3))
        with pytest.raises(DimensionMismatch):
            oscillator.normal_modes(state, f)


class TestTruncatedPropagate:
    def test_complement_kinetic_energy_is_constant(self):
        rng = np.random.default_rng(114)
        x = rng.standard_normal((8, 5))
        f = spectral.svd(x)
        state = oscillator.OscillatorState(
            p=rng.standard_normal(5), q=rng.standard_normal(5)
        )
        values = []
        for _ in range(5):
            state, noise, _ = oscillator.truncated_propagate(state, f, 2, 0.2)
            values.append(noise)
        assert np.allclose(values, values[0], rtol=1e-10)

    def test_noise_bounded_for_admissible_states(self):
        """Tail momenta built as frequency-weighted unit combinations
        stay below the discarded-energy ceiling."""
        rng = np.random.default_rng(115)
        x = rng.standard_normal((7, 5))
        f = spectral.svd(x)
        n = 2
        coeff = rng.uniform(-1.0, 1.0, size=f.m_rank - n)
        p = (f.w[:, n:] * (coeff * f.lambdas[n:])).sum(axis=1)
        state = oscillator.OscillatorState(p=p, q=np.zeros(5))
        _, noise, bound = oscillator.truncated_propagate(state, f, n, 0.1)
        assert noise <= bound + 1e-12
        assert bound == pytest.approx(0.5 * np.sum(f.lambdas[n:] ** 2))

    def test_full_rank_truncation_matches_propagate(self):
        rng = np.random.default_rng(116)
        x = rng.standard_normal((9, 4))
        f = spectral.svd(x)
        state = oscillator.OscillatorState(
            p=rng.standard_normal(4), q=rng.standard_normal(4)
        )
        full = oscillator.propagate(state, x.T @ x, 0.7)
        trunc, noise, bound = oscillator.truncated_propagate(
            state, f, f.m_rank, 0.7
        )
        assert np.allclose(trunc.p, full.p, atol=1e-10)
        assert np.allclose(trunc.q, full.q, atol=1e-10)
        assert noise == pytest.approx(0.0, abs=1e-20)
        assert bound == 0.0

    def test_rank_guards(self):
        f = spectral.svd(X_DIAG)
        state = oscillator.OscillatorState(p=np.zeros(2), q=np.zeros(2))
        with pytest.raises(RankTooLarge):
            oscillator.truncated_propagate(state, f, 0, 0.1)
        with pytest.raises(RankTooLarge):
            oscillator.truncated_propagate(state, f, 3, 0.1)


class TestRSquared:
    def test_hand_fraction(self):
        f = spectral.svd(X_DIAG)
        assert oscillator.r_squared(f, 1) == pytest.approx(9.0 / 13.0)
        assert oscillator.r_squared(f, 2) == pytest.approx(1.0)
        assert oscillator.r_squared(f, 0) == 0.0

    def test_monotone(self):
        rng = np.random.default_rng(117)
        f = spectral.svd(rng.standard_normal((8, 6)))
        values = [oscillator.r_squared(f, n) for n in range(f.m_rank + 1)]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(1.0)

    def test_guard_and_empty(self):
        f = spectral.svd(X_DIAG)
        with pytest.raises(RankTooLarge):
            oscillator.r_squared(f, 5)
        empty = spectral.svd(np.zeros((3, 2)))
        assert oscillator.r_squared(empty, 0) == 0.0
