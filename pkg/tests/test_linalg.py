import numpy as np
import pytest

from tfmcp.linalg import (
    ConvergenceError,
    RankDeficientError,
    projector_distance,
    qr_orthonormalize,
    regularized_b,
    sign_normalize,
    sym_top_eigs,
    top_left_singular,
)

from oracles import gram_schmidt, jacobi_eigh


def random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    return (m + m.T) / 2.0


class TestSymTopEigs:
    def test_identity(self):
        pairs = sym_top_eigs(np.eye(3), 2)
        np.testing.assert_allclose(pairs.values, [1.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(
            pairs.vectors.T @ pairs.vectors, np.eye(2), atol=1e-10
        )
        resid = np.eye(3) @ pairs.vectors - pairs.vectors * pairs.values
        assert np.linalg.norm(resid) <= 1e-9

    def test_diagonal(self):
        pairs = sym_top_eigs(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(pairs.values, [3.0, 2.0], atol=1e-9)
        np.testing.assert_allclose(np.abs(pairs.vectors[:, 0]), [1, 0, 0], atol=1e-8)
        np.testing.assert_allclose(np.abs(pairs.vectors[:, 1]), [0, 1, 0], atol=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_against_jacobi_oracle(self, seed):
        m = random_symmetric(8, seed)
        pairs = sym_top_eigs(m, 2)
        oracle_vals, _ = jacobi_eigh(m)
        np.testing.assert_allclose(pairs.values, oracle_vals[:2], atol=1e-9)

    def test_algebraic_not_magnitude_order(self):
        # the dominant-magnitude eigenvalue is negative; top-1 must skip it
        m = np.diag([1.0, -3.0])
        pairs = sym_top_eigs(m, 1)
        assert np.isclose(pairs.values[0], 1.0, atol=1e-9)

    def test_values_descending_and_orthonormal(self):
        m = random_symmetric(20, 7)
        pairs = sym_top_eigs(m, 5)
        assert np.all(np.diff(pairs.values) <= 1e-12)
        np.testing.assert_allclose(
            pairs.vectors.T @ pairs.vectors, np.eye(5), atol=1e-10
        )

    def test_zero_matrix(self):
        pairs = sym_top_eigs(np.zeros((4, 4)), 2)
        np.testing.assert_array_equal(pairs.values, [0.0, 0.0])

    def test_r_out_of_range(self):
        with pytest.raises(ValueError):
            sym_top_eigs(np.eye(3), 4)

    def test_nonconvergence_reports_residual(self):
        m = random_symmetric(30, 3)
        with pytest.raises(ConvergenceError) as err:
            sym_top_eigs(m, 2, tol=1e-14, max_sweeps=1)
        assert err.value.residual > 0

    def test_larger_matrices_match_oracle(self):
        for seed, n in [(11, 30), (12, 50)]:
            m = random_symmetric(n, seed)
            pairs = sym_top_eigs(m, 3)
            oracle_vals, _ = jacobi_eigh(m)
            np.testing.assert_allclose(pairs.values, oracle_vals[:3], atol=1e-9)


class TestTopLeftSingular:
    def test_rank_one(self):
        a = np.array([3.0, 4.0]) / 5.0
        b = np.array([1.0, 2.0, 2.0])
        u = top_left_singular(np.outer(a, b))
        assert min(np.linalg.norm(u - a), np.linalg.norm(u + a)) <= 1e-9

    def test_diagonal(self):
        u = top_left_singular(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(np.abs(u), [1.0, 0.0], atol=1e-9)

    def test_against_gram_eigen_oracle(self):
        rng = np.random.default_rng(21)
        m = rng.standard_normal((5, 7))
        u = top_left_singular(m)
        _, vecs = jacobi_eigh(m @ m.T)
        assert abs(u @ vecs[:, 0]) >= 1.0 - 1e-9

    def test_maximizes_rayleigh_quotient(self):
        rng = np.random.default_rng(22)
        m = rng.standard_normal((6, 9))
        u = top_left_singular(m)
        oracle_vals, _ = jacobi_eigh(m @ m.T)
        assert u @ (m @ m.T) @ u >= oracle_vals[0] - 1e-9

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            top_left_singular(np.zeros((3, 3)))


class TestRegularizedB:
    def test_orthonormal_input_returns_itself(self):
        q, _ = np.linalg.qr(np.random.default_rng(30).standard_normal((6, 3)))
        np.testing.assert_allclose(regularized_b(q, 0.1), q, atol=1e-10)

    def test_bilinear_identity_when_floor_inactive(self):
        # Gram eigenvalues 1.5 and 0.5, both above the floor
        rng = np.random.default_rng(31)
        q, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        a = q @ np.diag([np.sqrt(1.5), np.sqrt(0.5)])
        b = regularized_b(a, 0.1)
        np.testing.assert_allclose(a.T @ b, np.eye(2), atol=1e-10)

    def test_duplicate_columns_floor_engages(self):
        v = np.array([1.0, 0.0, 0.0])
        a = np.column_stack([v, v])
        b = regularized_b(a, 0.1)
        assert np.all(np.isfinite(b))
        spec_a = np.linalg.norm(a, 2)
        spec_b = np.linalg.norm(b, 2)
        assert spec_b <= spec_a / 0.1 + 1e-12

    def test_invalid_floor(self):
        with pytest.raises(ValueError):
            regularized_b(np.eye(3), 1.5)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            regularized_b(np.zeros((2, 3)), 0.1)


class TestQrOrthonormalize:
    def test_orthonormal_fixed_point(self):
        q, _ = np.linalg.qr(np.random.default_rng(40).standard_normal((7, 3)))
        q = q * np.sign(np.sum(q, axis=0))  # any fixed sign pattern
        np.testing.assert_allclose(qr_orthonormalize(q), q, atol=1e-12)

    def test_two_column_example(self):
        e1 = np.array([1.0, 0.0])
        a = np.column_stack([e1, e1 + np.array([0.0, 1.0])])
        np.testing.assert_allclose(qr_orthonormalize(a), np.eye(2), atol=1e-12)

    def test_span_matches_gram_schmidt_oracle(self):
        rng = np.random.default_rng(41)
        a = rng.standard_normal((6, 3))
        q = qr_orthonormalize(a)
        np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-10)
        g = gram_schmidt(a)
        np.testing.assert_allclose(q @ q.T, g @ g.T, atol=1e-10)

    def test_rank_deficient_rejected(self):
        v = np.array([1.0, 2.0, 3.0])
        with pytest.raises(RankDeficientError):
            qr_orthonormalize(np.column_stack([v, 2 * v]))


class TestSignNormalize:
    def test_flips_when_largest_entry_negative(self):
        np.testing.assert_array_equal(
            sign_normalize(np.array([-0.8, 0.6])), np.array([0.8, -0.6])
        )

    def test_unchanged_when_positive(self):
        v = np.array([0.6, 0.8])
        np.testing.assert_array_equal(sign_normalize(v), v)

    def test_largest_entry_rule(self):
        v = np.array([-0.5, 0.5, -0.707])
        np.testing.assert_array_equal(sign_normalize(v), -v)

    def test_tie_breaks_on_smallest_index(self):
        v = np.array([-0.5, 0.5])
        np.testing.assert_array_equal(sign_normalize(v), np.array([0.5, -0.5]))


class TestProjectorDistance:
    def test_matches_spectral_norm_for_moderate_angles(self):
        rng = np.random.default_rng(50)
        for _ in range(20):
            u = rng.standard_normal(6)
            v = rng.standard_normal(6)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            direct = np.linalg.norm(np.outer(u, u) - np.outer(v, v), 2)
            assert abs(projector_distance(u, v) - direct) <= 1e-10

    def test_accurate_at_tiny_angles(self):
        u = np.zeros(5)
        u[0] = 1.0
        v = u.copy()
        v[1] = 1e-10
        v /= np.linalg.norm(v)
        assert abs(projector_distance(u, v) - 1e-10) <= 1e-12

    def test_sign_invariance(self):
        rng = np.random.default_rng(51)
        u = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        assert projector_distance(u, -v) == projector_distance(u, v)
