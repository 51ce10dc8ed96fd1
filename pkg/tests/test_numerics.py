"""Metric-level tests: matmul, cosines, singular values, SSIM, percentile."""

import numpy as np
import pytest

from relprop.errors import ContractViolationError, NumericalFailureError, UndefinedAngleError
from relprop.numerics import (
    cosine_similarity,
    matmul,
    max_pairwise_column_cosine,
    pairwise_column_cosines,
    percentile,
    ssim,
    svd_deflated,
    top2_singular_values,
)

from oracles import eig_singular_values, naive_matmul, nearest_rank_percentile, ssim_direct


class TestMatmul:
    def test_identity(self):
        np.testing.assert_allclose(matmul(np.eye(2), np.array([3.0, 4.0])), [3.0, 4.0])

    def test_hand_sum(self):
        np.testing.assert_allclose(matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, 1.0])), [3.0, 7.0])

    def test_against_triple_loop(self):
        g = np.random.default_rng(7)
        a = g.normal(size=(5, 7))
        b = g.normal(size=(7, 3))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            matmul(np.ones((2, 3)), np.ones((2, 2)))


class TestCosine:
    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_parallel(self):
        assert cosine_similarity([1.0, 1.0], [2.0, 2.0]) == 1.0

    def test_antiparallel(self):
        assert cosine_similarity([1.0, 0.0], [-1.0, 0.0]) == -1.0

    def test_zero_norm_rejected(self):
        with pytest.raises(UndefinedAngleError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_properties(self):
        g = np.random.default_rng(3)
        for _ in range(200):
            a = g.normal(size=6)
            b = g.normal(size=6)
            lam = float(g.uniform(0.1, 10.0))
            assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-15)
            assert cosine_similarity(a, b) == cosine_similarity(b, a)
            assert cosine_similarity(lam * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-12)
            assert -1.0 <= cosine_similarity(a, b) <= 1.0


class TestTop2Singular:
    def test_diagonal(self):
        s1, s2 = top2_singular_values(np.diag([3.0, 1.0]))
        assert s1 == pytest.approx(3.0, rel=1e-10)
        assert s2 == pytest.approx(1.0, rel=1e-10)

    def test_rank_one(self):
        m = np.outer([1.0, 2.0], [1.0, 1.0, 1.0])
        s1, s2 = top2_singular_values(m)
        assert s1 == pytest.approx(np.sqrt(5.0) * np.sqrt(3.0), rel=1e-10)
        assert s2 <= 1e-10 * s1

    def test_against_eig_oracle(self):
        g = np.random.default_rng(11)
        for _ in range(50):
            m = g.normal(size=(20, 30))
            s1, s2 = top2_singular_values(m)
            ref = eig_singular_values(m)
            assert s1 == pytest.approx(ref[0], rel=1e-6)
            assert s2 == pytest.approx(ref[1], rel=1e-6)

    def test_sigma1_bounds_random_directions(self):
        # On 2x2 matrices, 1000 random unit directions resolve the top
        # singular value to well within 1e-4 relative.
        g = np.random.default_rng(5)
        for _ in range(20):
            m = g.normal(size=(2, 2))
            s1, _ = top2_singular_values(m)
            best = 0.0
            for _ in range(1000):
                u = g.normal(size=2)
                u /= np.linalg.norm(u)
                best = max(best, float(np.linalg.norm(m @ u)))
            assert best <= s1 * (1 + 1e-12)
            assert best == pytest.approx(s1, rel=1e-4)

    def test_iteration_cap_raises(self):
        g = np.random.default_rng(2)
        m = g.normal(size=(40, 40))
        with pytest.raises(NumericalFailureError) as info:
            top2_singular_values(m, max_iter=2)
        assert info.value.residual is not None

    def test_single_column(self):
        s1, s2 = top2_singular_values(np.array([[3.0], [4.0]]))
        assert s1 == pytest.approx(5.0, rel=1e-12)
        assert s2 == 0.0


class TestSvdDeflated:
    def test_reconstruction(self):
        g = np.random.default_rng(9)
        m = g.normal(size=(6, 4))
        u, s, vt = svd_deflated(m)
        np.testing.assert_allclose(u @ np.diag(s) @ vt, m, atol=1e-7)
        assert np.all(np.diff(s) <= 1e-9)


class TestColumnCosines:
    def test_rank_one_columns_parallel(self):
        m = np.outer([1.0, 2.0], [3.0, 4.0, 5.0])
        assert max_pairwise_column_cosine(m) == pytest.approx(1.0, abs=1e-12)

    def test_identity_orthogonal(self):
        assert max_pairwise_column_cosine(np.eye(2)) == 0.0

    def test_hand_case(self):
        m = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert max_pairwise_column_cosine(m) == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-12)

    def test_zero_column_rejected(self):
        with pytest.raises(UndefinedAngleError):
            max_pairwise_column_cosine(np.array([[1.0, 0.0], [1.0, 0.0]]))

    def test_matches_sigma_ratio_on_rank1_perturbations(self):
        # For non-negative matrices without zero columns, all-parallel
        # columns and a vanishing second singular value are equivalent.
        g = np.random.default_rng(21)
        for _ in range(20):
            base = np.outer(g.uniform(0.1, 1.0, size=5), g.uniform(0.1, 1.0, size=4))
            noise = g.uniform(0.0, 1.0, size=(5, 4)) * 0.2
            for m in (base, base + noise):
                s1, s2 = top2_singular_values(m)
                parallel = max_pairwise_column_cosine(m) >= 1.0 - 1e-12
                assert parallel == (s2 <= 1e-6 * s1)

    def test_condensed_count(self):
        g = np.random.default_rng(1)
        m = np.abs(g.normal(size=(4, 6))) + 0.1
        assert pairwise_column_cosines(m).size == 15


class TestSsim:
    def test_self_similarity_exact(self):
        g = np.random.default_rng(13)
        x = g.uniform(size=(16, 16))
        assert ssim(x, x) == 1.0

    def test_symmetry(self):
        g = np.random.default_rng(14)
        a = g.uniform(size=(16, 16))
        b = g.uniform(size=(16, 16))
        assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12

    def test_tiny_offset(self):
        g = np.random.default_rng(15)
        x = g.uniform(size=(16, 16))
        y = x + 1e-3
        value = ssim(x, y)
        assert value >= 0.99
        assert value == pytest.approx(ssim_direct(x, y), abs=1e-12)

    def test_checkerboard_inversion_nonpositive(self):
        x = np.indices((8, 8)).sum(axis=0) % 2.0
        value = ssim(x, 1.0 - x)
        assert value <= 0.0
        assert value == pytest.approx(ssim_direct(x, 1.0 - x), abs=1e-12)

    def test_random_pair_matches_direct_formula(self):
        g = np.random.default_rng(16)
        a = g.uniform(size=(20, 14))
        b = g.uniform(size=(20, 14))
        assert ssim(a, b) == pytest.approx(ssim_direct(a, b), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolationError):
            ssim(np.zeros((4, 4)), np.zeros((4, 5)))


class TestPercentile:
    def test_median_of_four(self):
        assert percentile([1.0, 2.0, 3.0, 4.0], 50.0) == 2.0

    def test_singleton(self):
        for q in (0.0, 37.0, 100.0):
            assert percentile([5.0], q) == 5.0

    def test_maximum(self):
        assert percentile([3.0, 1.0, 2.0], 100.0) == 3.0

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            percentile([], 50.0)

    def test_monotone_and_permutation_invariant(self):
        g = np.random.default_rng(17)
        values = g.normal(size=31)
        shuffled = values.copy()
        g.shuffle(shuffled)
        previous = -np.inf
        for q in np.linspace(0.0, 100.0, 21):
            v = percentile(values, q)
            assert v >= previous
            assert v == percentile(shuffled, q)
            assert v == nearest_rank_percentile(values, q)
            previous = v
