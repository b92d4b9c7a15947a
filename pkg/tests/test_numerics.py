import math

import numpy as np
import pytest

from harqest import (
    ModelError,
    gaussian_q,
    kronecker,
    null_space_vector,
    spectral_radius,
    stationary_distribution,
)


def eig_2x2_oracle(m):
    """Roots of the characteristic polynomial of a real 2x2 matrix."""
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0:
        roots = [(tr + math.sqrt(disc)) / 2.0, (tr - math.sqrt(disc)) / 2.0]
        return max(abs(r) for r in roots)
    return math.sqrt(det)  # complex pair: |root| = sqrt(det)


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(2)) == pytest.approx(1.0, abs=1e-12)

    def test_reference_state_matrix(self):
        # [[2.4, 0.2], [0.2, 0.8]]: the quadratic formula gives
        # (3.2 + sqrt(3.2^2 - 4*1.88)) / 2 = 2.424621125123532.
        m = np.array([[2.4, 0.2], [0.2, 0.8]])
        expected = eig_2x2_oracle(m)
        assert expected == pytest.approx(2.424621125123532, rel=1e-12)
        assert spectral_radius(m) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_2x2_against_quadratic_formula(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(2, 2))
        assert spectral_radius(m) == pytest.approx(eig_2x2_oracle(m), rel=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_scaling_homogeneity(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = rng.integers(2, 5)
        m = rng.normal(size=(n, n))
        c = float(rng.uniform(-3.0, 3.0))
        assert spectral_radius(c * m) == pytest.approx(abs(c) * spectral_radius(m), rel=1e-9, abs=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            spectral_radius(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            spectral_radius(np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestGaussianQ:
    def test_half_at_zero(self):
        assert gaussian_q(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_far_tail(self):
        assert gaussian_q(8.0) < 1e-15

    def test_quadrature_oracle_at_one(self):
        # Simpson integration of the standard normal density over [1, 9]
        # (tail beyond 9 is < 1.2e-19): 0.15865525393145705.
        xs = np.linspace(1.0, 9.0, 200_001)
        dens = np.exp(-(xs**2) / 2.0) / math.sqrt(2.0 * math.pi)
        h = xs[1] - xs[0]
        simpson = h / 3.0 * (dens[0] + dens[-1] + 4.0 * dens[1:-1:2].sum() + 2.0 * dens[2:-2:2].sum())
        assert simpson == pytest.approx(0.15865525393145705, abs=1e-12)
        assert gaussian_q(1.0) == pytest.approx(simpson, abs=1e-12)

    @pytest.mark.parametrize("x", [-6.5, -2.0, -0.3, 0.0, 0.7, 1.0, 3.25, 6.5])
    def test_symmetry(self, x):
        assert gaussian_q(x) + gaussian_q(-x) == pytest.approx(1.0, abs=1e-12)


class TestKronecker:
    def test_identity_factor_is_block_diagonal(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = kronecker(np.eye(2), b)
        expected = np.block([[b, np.zeros((2, 2))], [np.zeros((2, 2)), b]])
        np.testing.assert_array_equal(out, expected)

    def test_column_times_row(self):
        out = kronecker(np.array([[1.0], [1.0]]), np.array([[2.0, 3.0]]))
        np.testing.assert_array_equal(out, np.array([[2.0, 3.0], [2.0, 3.0]]))

    def test_definition_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(2, 2))
        b = rng.normal(size=(3, 2))
        out = kronecker(a, b)
        assert out.shape == (6, 4)
        for i in range(2):
            for j in range(2):
                for k in range(3):
                    for l in range(2):
                        assert out[i * 3 + k, j * 2 + l] == pytest.approx(a[i, j] * b[k, l])

    @pytest.mark.parametrize("seed", range(4))
    def test_mixed_product_property(self, seed):
        rng = np.random.default_rng(200 + seed)
        a, c = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
        b, d = rng.normal(size=(2, 2)), rng.normal(size=(2, 3))
        left = kronecker(a, b) @ kronecker(c, d)
        right = kronecker(a @ c, b @ d)
        np.testing.assert_allclose(left, right, atol=1e-12)


class TestStationaryDistribution:
    def test_symmetric_two_state(self):
        out = stationary_distribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-12)

    def test_doubly_stochastic(self):
        out = stationary_distribution(np.array([[0.8, 0.2], [0.2, 0.8]]))
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-12)

    def test_hand_solved_balance(self):
        # 0.2 e1 = 0.5 e2 with e1 + e2 = 1 gives (5/7, 2/7).
        out = stationary_distribution(np.array([[0.8, 0.5], [0.2, 0.5]]))
        np.testing.assert_allclose(out, [5.0 / 7.0, 2.0 / 7.0], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_fixed_point_residual(self, seed):
        rng = np.random.default_rng(300 + seed)
        n = int(rng.integers(2, 6))
        p = rng.uniform(0.05, 1.0, size=(n, n))
        p /= p.sum(axis=0, keepdims=True)
        e = stationary_distribution(p)
        assert np.max(np.abs(p @ e - e)) <= 1e-10
        assert e.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(e >= 0)

    def test_rejects_row_stochastic(self):
        p = np.array([[0.9, 0.1], [0.4, 0.6]])  # rows sum to 1, columns do not
        with pytest.raises(ModelError):
            stationary_distribution(p)

    def test_rejects_non_unique(self):
        with pytest.raises(ModelError):
            stationary_distribution(np.eye(2))


class TestNullSpaceVector:
    def test_simple_rank_deficient(self):
        v = null_space_vector(np.array([[0.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_allclose(v / np.linalg.norm(v), [1.0, 0.0], atol=1e-12)

    def test_matches_stationary_distribution(self):
        p = np.array([[0.8, 0.5], [0.2, 0.5]])
        v = null_space_vector(p - np.eye(2))
        np.testing.assert_allclose(v / v.sum(), stationary_distribution(p), atol=1e-10)

    def test_residual_bound(self):
        rng = np.random.default_rng(11)
        p = rng.uniform(0.1, 1.0, size=(4, 4))
        p /= p.sum(axis=0, keepdims=True)
        m = p - np.eye(4)
        v = null_space_vector(m)
        assert np.max(np.abs(m @ v)) <= 1e-8 * np.max(np.abs(v))
        assert np.all(v >= 0)

    def test_rejects_full_rank(self):
        with pytest.raises(ModelError):
            null_space_vector(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_rejects_deficiency_two(self):
        with pytest.raises(ModelError):
            null_space_vector(np.zeros((2, 2)))
