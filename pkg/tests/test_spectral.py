"""Spectral factorization, whitening, and the quasi square roots."""

import numpy as np
import pytest

from gramkit import spectral
from gramkit.errors import ConvergenceFailure, IndexOutOfRank

X_DIAG = np.array([[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]])


class TestSvd:
    def test_axis_aligned_oracle(self):
        f = spectral.svd(X_DIAG)
        assert f.m_rank == 2
        assert np.allclose(f.lambdas, [3.0, 2.0])
        assert np.allclose(f.w, np.eye(2))
        assert np.allclose(f.v, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def test_reconstruction(self):
        rng = np.random.default_rng(51)
        for shape in [(8, 5), (5, 8), (6, 6)]:
            a = rng.standard_normal(shape)
            f = spectral.svd(a)
            assert np.allclose((f.v * f.lambdas) @ f.w.T, a, atol=1e-10)

    def test_orthonormal_factors(self):
        rng = np.random.default_rng(52)
        a = rng.standard_normal((9, 6))
        f = spectral.svd(a)
        assert np.allclose(f.v.T @ f.v, np.eye(f.m_rank), atol=1e-10)
        assert np.allclose(f.w.T @ f.w, np.eye(f.m_rank), atol=1e-10)

    def test_descending_order(self):
        rng = np.random.default_rng(53)
        f = spectral.svd(rng.standard_normal((10, 7)))
        assert np.all(np.diff(f.lambdas) <= 0)
        assert np.all(f.lambdas > 0)

    def test_sign_convention(self):
        """The largest-magnitude entry of each observable factor column
        is positive, which pins the otherwise arbitrary global signs."""
        rng = np.random.default_rng(54)
        for _ in range(5):
            f = spectral.svd(rng.standard_normal((8, 5)))
            for j in range(f.m_rank):
                col = f.w[:, j]
                assert col[np.argmax(np.abs(col))] > 0

    def test_sign_flip_moves_both_factors(self):
        a = np.array([[-3.0, 0.0], [0.0, 2.0]])
        f = spectral.svd(a)
        assert f.w[0, 0] > 0
        assert f.v[0, 0] < 0
        assert np.allclose((f.v * f.lambdas) @ f.w.T, a, atol=1e-12)

    def test_rank_deficiency_detected(self):
        rng = np.random.default_rng(55)
        base = rng.standard_normal((7, 3))
        a = np.column_stack([base, base[:, 0] + base[:, 1]])
        f = spectral.svd(a)
        assert f.m_rank == 3

    def test_zero_matrix(self):
        f = spectral.svd(np.zeros((4, 3)))
        assert f.m_rank == 0
        assert f.v.shape == (4, 0)
        assert f.lambdas.shape == (0,)
        assert f.w.shape == (3, 0)

    def test_gram_eigenvalues_match(self):
        """Both Gram matrices share the squared singular values."""
        rng = np.random.default_rng(56)
        a = rng.standard_normal((6, 9))
        f = spectral.svd(a)
        evals = np.sort(np.linalg.eigvalsh(a @ a.T))[::-1]
        assert np.allclose(f.lambdas**2, evals[: f.m_rank], atol=1e-8)


class TestWhitening:
    def test_whitened_mappings_orthonormal(self):
        rng = np.random.default_rng(57)
        a = rng.standard_normal((10, 6))
        f = spectral.svd(a)
        white = spectral.whiten(a, f)
        assert np.allclose(white.T @ white, np.eye(f.m_rank), atol=1e-10)
        assert np.allclose(white, f.v, atol=1e-10)

    def test_round_trip(self):
        rng = np.random.default_rng(58)
        a = rng.standard_normal((7, 4))
        f = spectral.svd(a)
        back = spectral.dewhiten(spectral.whiten(a, f), f)
        assert np.allclose(back, a, atol=1e-10)


class TestEigenMappings:
    def test_hand_mapping(self):
        f = spectral.svd(X_DIAG)
        assert np.allclose(spectral.eigen_mapping(X_DIAG, f, 0),
                           [3.0, 0.0, 0.0])
        assert np.allclose(spectral.eigen_mapping(X_DIAG, f, 1),
                           [0.0, 2.0, 0.0])

    def test_mapping_is_scaled_eigen_observation(self):
        rng = np.random.default_rng(59)
        a = rng.standard_normal((8, 5))
        f = spectral.svd(a)
        for i in range(f.m_rank):
            mapped = spectral.eigen_mapping(a, f, i)
            assert np.allclose(mapped, f.lambdas[i] * f.v[:, i], atol=1e-10)

    def test_index_guard(self):
        f = spectral.svd(X_DIAG)
        with pytest.raises(IndexOutOfRank):
            spectral.eigen_mapping(X_DIAG, f, 2)
        with pytest.raises(IndexOutOfRank):
            spectral.eigen_mapping(X_DIAG, f, -1)

    def test_accessors_return_eigenpairs(self):
        f = spectral.svd(X_DIAG)
        w, evals_w = spectral.eigen_observations(f)
        v, evals_v = spectral.eigen_observables(f)
        assert np.allclose(evals_w, [9.0, 4.0])
        assert np.allclose(evals_v, [9.0, 4.0])
        assert w.shape == (2, 2)
        assert v.shape == (3, 2)


class TestQuasiSqrt:
    def test_factors_rebuild_grams(self):
        rng = np.random.default_rng(60)
        a = rng.standard_normal((8, 5))
        f = spectral.svd(a)
        h, h_prime = spectral.quasi_sqrt(f)
        assert np.allclose(h.T @ h, a.T @ a, atol=1e-8)
        assert np.allclose(h_prime @ h_prime.T, a @ a.T, atol=1e-8)

    def test_cross_products_are_diagonal(self):
        """The short products collapse to the diagonal eigenvalue matrix
        even after truncation, because the factors are orthonormal."""
        rng = np.random.default_rng(61)
        a = rng.standard_normal((9, 4))
        f = spectral.svd(a)
        h, h_prime = spectral.quasi_sqrt(f)
        lam_sq = np.diag(f.lambdas**2)
        assert np.allclose(h @ h.T, lam_sq, atol=1e-8)
        assert np.allclose(h_prime.T @ h_prime, lam_sq, atol=1e-8)


class TestSpectrumSummaries:
    def test_cumulative_energy(self):
        f = spectral.svd(X_DIAG)
        assert np.allclose(spectral.cumulative_energy(f),
                           [9.0 / 13.0, 1.0])

    def test_cumulative_energy_monotone(self):
        rng = np.random.default_rng(62)
        f = spectral.svd(rng.standard_normal((12, 8)))
        energy = spectral.cumulative_energy(f)
        assert np.all(np.diff(energy) >= 0)
        assert abs(energy[-1] - 1.0) < 1e-12

    def test_top_eigenvalue_asymptotic(self):
        observed, predicted = spectral.top_eigenvalue_asymptotic(
            100, 100, trials=3, seed=5
        )
        assert predicted == pytest.approx(20.0)
        assert 0.9 < observed / predicted < 1.1


class TestMatrixValues:
    def test_unwraps_values_attribute(self):
        class Holder:
            values = np.ones((2, 2))

        assert np.array_equal(spectral.matrix_values(Holder()),
                              np.ones((2, 2)))

    def test_plain_array_passthrough(self):
        a = np.ones((2, 3))
        assert spectral.matrix_values(a) is not None
        assert spectral.matrix_values(a).dtype == float
