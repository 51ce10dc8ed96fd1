"""Per-layer rule math against hand evaluations and per-entry oracles."""

import numpy as np
import pytest

from relprop.attribution import propagators as prop
from relprop.errors import ContractViolationError

from oracles import alphabeta_dense_direct, nearest_rank_percentile


class TestZPlus:
    def test_hand_example(self):
        w = np.array([[1.0, -1.0], [2.0, 1.0]])
        h = np.array([1.0, 1.0])
        r = np.array([3.0, 3.0])
        out = prop.dense_zplus(w, None, h, r)
        np.testing.assert_allclose(out, [5.0, 1.0])
        assert out.sum() == pytest.approx(6.0)

    def test_single_positive_row_routes_everything(self):
        w = np.array([[2.0, 3.0]])
        h = np.array([1.0, 2.0])
        out = prop.dense_zplus(w, None, h, np.array([4.0]))
        np.testing.assert_allclose(out, [4.0 * 2 / 8, 4.0 * 6 / 8])

    def test_zero_relevance_gives_zero(self):
        w = np.random.default_rng(0).normal(size=(3, 4))
        h = np.random.default_rng(1).normal(size=4)
        out = prop.dense_zplus(w, None, h, np.zeros(3))
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_zero_denominator_distributes_nothing(self):
        w = np.array([[-1.0, -2.0], [1.0, 0.0]])
        h = np.array([1.0, 1.0])
        out = prop.dense_zplus(w, None, h, np.array([5.0, 7.0]))
        np.testing.assert_allclose(out, [7.0, 0.0])

    def test_bias_enters_denominator_and_drops_share(self):
        w = np.array([[1.0, 1.0]])
        h = np.array([1.0, 1.0])
        out = prop.dense_zplus(w, np.array([2.0]), h, np.array([4.0]))
        # denominator 1+1+2: the bias share (half) is dropped
        np.testing.assert_allclose(out, [1.0, 1.0])


class TestLRPz:
    def test_hand_example(self):
        w = np.array([[2.0, -1.0], [4.0, 1.0]])
        h = np.array([1.0, 1.0])
        r = np.array([1.0, 5.0])
        out = prop.dense_lrpz(w, None, h, r, eps=0.0)
        np.testing.assert_allclose(out, [6.0, 0.0])
        assert out.sum() == pytest.approx(6.0)

    def test_diagonal_positive_identity(self):
        w = np.diag([2.0, 3.0])
        h = np.array([1.0, 5.0])
        r = np.array([7.0, 11.0])
        np.testing.assert_allclose(prop.dense_lrpz(w, None, h, r, eps=0.0), r)

    def test_stabilizer_sign_matched(self):
        # z = [1, -1] stabilizes to [1.5, -1.5]; Wt s = 2/3 + 2/3
        w = np.array([[1.0], [-1.0]])
        h = np.array([1.0])
        out = prop.dense_lrpz(w, None, h, np.array([1.0, 1.0]), eps=0.5)
        np.testing.assert_allclose(out, [4.0 / 3.0])

    def test_zero_denominator_distributes_nothing(self):
        w = np.array([[1.0, -1.0]])
        h = np.array([1.0, 1.0])
        out = prop.dense_lrpz(w, None, h, np.array([3.0]), eps=1e-9)
        np.testing.assert_array_equal(out, [0.0, 0.0])


class TestAlphaBeta:
    def test_alpha1_beta0_equals_zplus_bitwise(self):
        g = np.random.default_rng(5)
        for _ in range(10):
            w = g.normal(size=(4, 6))
            h = g.normal(size=6)
            r = g.normal(size=4)
            b = g.normal(size=4)
            ab = prop.dense_alphabeta(w, b, h, r, 1.0, 0.0)
            zp = prop.dense_zplus(w, b, h, r)
            np.testing.assert_array_equal(ab, zp)

    def test_alpha2_beta1_against_per_entry_oracle(self):
        w = np.array([[1.0, -1.0], [2.0, 1.0]])
        h = np.array([1.0, 1.0])
        r = np.array([3.0, 3.0])
        out = prop.dense_alphabeta(w, None, h, r, 2.0, 1.0)
        want = alphabeta_dense_direct(w, h, r, 2.0, 1.0)
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_all_positive_reduces_to_scaled_zplus(self):
        g = np.random.default_rng(6)
        w = np.abs(g.normal(size=(3, 5)))
        h = np.abs(g.normal(size=5))
        r = g.normal(size=3)
        out = prop.dense_alphabeta(w, None, h, r, 2.0, 1.0)
        np.testing.assert_allclose(out, 2.0 * prop.dense_zplus(w, None, h, r), atol=1e-12)

    def test_random_cases_against_oracle(self):
        g = np.random.default_rng(7)
        for alpha, beta in [(2.0, 1.0), (5.0, 4.0)]:
            w = g.normal(size=(5, 7))
            h = g.normal(size=7)
            r = g.normal(size=5)
            b = g.normal(size=5)
            out = prop.dense_alphabeta(w, b, h, r, alpha, beta)
            want = alphabeta_dense_direct(w, h, r, alpha, beta, bias=b)
            np.testing.assert_allclose(out, want, atol=1e-12)


class TestDTDInput:
    def test_w2_hand_example(self):
        out = prop.dense_w2(np.array([[1.0, 2.0]]), np.array([5.0]))
        np.testing.assert_allclose(out, [1.0, 4.0])

    def test_w2_ignores_input(self):
        w = np.random.default_rng(8).normal(size=(3, 4))
        r = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(prop.dense_w2(w, r), prop.dense_w2(w, r))

    def test_w2_nonnegative(self):
        g = np.random.default_rng(9)
        out = prop.dense_w2(g.normal(size=(4, 6)), np.abs(g.normal(size=4)))
        assert np.all(out >= 0)

    def test_wbox_degenerate_box_gives_zero(self):
        w = np.array([[1.0, -1.0]])
        x = np.array([0.5, 0.5])
        out = prop.dense_wbox(w, x, 0.5, 0.5, np.array([3.0]))
        np.testing.assert_array_equal(out, [0.0, 0.0])

    def test_wbox_nonnegative_inside_box(self):
        g = np.random.default_rng(10)
        w = g.normal(size=(3, 5))
        x = g.uniform(0.0, 1.0, size=5)
        out = prop.dense_wbox(w, x, 0.0, 1.0, np.abs(g.normal(size=3)))
        assert np.all(out >= -1e-12)

    def test_wbox_rejects_out_of_box(self):
        with pytest.raises(ContractViolationError):
            prop.dense_wbox(np.ones((1, 2)), np.array([2.0, 0.0]), 0.0, 1.0, np.array([1.0]))


class TestPattern:
    def test_inverse_scaled_pattern_returns_relevance(self):
        g = np.random.default_rng(11)
        w = g.normal(size=(3, 3)) + 5 * np.eye(3)
        a = np.where(np.eye(3) > 0, 1.0 / w, 0.0)
        r = g.normal(size=3)
        np.testing.assert_allclose(prop.dense_pattern(w, a, r, "attribution"), r, atol=1e-12)

    def test_rank1_pattern_fixes_direction(self):
        g = np.random.default_rng(12)
        a = np.outer(g.uniform(1, 2, size=4), g.uniform(1, 2, size=5)).T  # (out=5? no)
        a = np.outer(g.uniform(1, 2, size=5), g.uniform(1, 2, size=4))  # (out, in)
        w = g.normal(size=(5, 4))
        r1 = g.normal(size=5)
        r2 = g.normal(size=5)
        o1 = prop.dense_pattern(w, a, r1, "net")
        o2 = prop.dense_pattern(w, a, r2, "net")
        cos = abs(o1 @ o2) / (np.linalg.norm(o1) * np.linalg.norm(o2))
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_against_matmul_oracle(self):
        g = np.random.default_rng(13)
        w = g.normal(size=(3, 4))
        a = g.normal(size=(3, 4))
        r = g.normal(size=3)
        np.testing.assert_allclose(prop.dense_pattern(w, a, r, "net"), a.T @ r, atol=1e-14)
        np.testing.assert_allclose(prop.dense_pattern(w, a, r, "attribution"), (w * a).T @ r, atol=1e-14)


class TestReluVariants:
    def test_guidedbp_hand_example(self):
        out = prop.relu_modified(np.array([1.0, 0.0]), np.array([2.0, -3.0]), "guidedbp")
        np.testing.assert_array_equal(out, [2.0, 0.0])

    def test_deconv_rectifies_without_mask(self):
        out = prop.relu_modified(np.array([0.0, 0.0]), np.array([-1.0, 4.0]), "deconv")
        np.testing.assert_array_equal(out, [0.0, 4.0])

    def test_rectgrad_median_cut(self):
        out = prop.relu_modified(np.ones(4), np.array([1.0, 2.0, 3.0, 4.0]), "rectgrad", q=50.0)
        np.testing.assert_array_equal(out, [0.0, 0.0, 3.0, 4.0])

    def test_rectgrad_threshold_matches_percentile_oracle(self):
        g = np.random.default_rng(14)
        r = g.normal(size=32)
        mask = (g.uniform(size=32) > 0.3).astype(float)
        out = prop.relu_modified(mask, r, "rectgrad", q=75.0)
        threshold = nearest_rank_percentile(list(mask * r), 75.0)
        np.testing.assert_array_equal(out, np.where(mask * r > threshold, mask * r, 0.0))

    def test_gradient_mask(self):
        out = prop.relu_gradient(np.array([1.0, 0.0, 1.0]), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out, [1.0, 0.0, 3.0])


class TestConvRules:
    """Conv rules must agree with the dense rules on the lowered matrix."""

    @pytest.mark.parametrize("alpha,beta", [(1.0, 0.0), (2.0, 1.0)])
    def test_conv_alphabeta_matches_lowered_dense(self, alpha, beta):
        from relprop.model import Conv2D, conv_as_matrix

        g = np.random.default_rng(15)
        layer = Conv2D("c", 2, 3, (3, 3))
        w = g.normal(size=(3, 3, 2, 3))
        x = g.normal(size=(4, 4, 2))
        r = g.normal(size=(4, 4, 3))
        got = prop.conv_alphabeta(w, None, x, r, (1, 1), "same", alpha, beta)
        mat = conv_as_matrix(layer, x.shape, w)
        want = prop.dense_alphabeta(mat, None, x.ravel(), r.ravel(), alpha, beta)
        np.testing.assert_allclose(got.ravel(), want, atol=1e-10)

    def test_conv_lrpz_matches_lowered_dense(self):
        from relprop.model import Conv2D, conv_as_matrix

        g = np.random.default_rng(16)
        layer = Conv2D("c", 2, 2, (3, 3))
        w = g.normal(size=(3, 3, 2, 2))
        x = g.normal(size=(5, 5, 2))
        r = g.normal(size=(5, 5, 2))
        got = prop.conv_lrpz(w, None, x, r, (1, 1), "same", eps=1e-9)
        mat = conv_as_matrix(layer, x.shape, w)
        want = prop.dense_lrpz(mat, None, x.ravel(), r.ravel(), eps=1e-9)
        np.testing.assert_allclose(got.ravel(), want, atol=1e-10)

    def test_conv_w2_matches_lowered_dense(self):
        from relprop.model import Conv2D, conv_as_matrix

        g = np.random.default_rng(17)
        layer = Conv2D("c", 2, 2, (3, 3))
        w = g.normal(size=(3, 3, 2, 2))
        x = g.normal(size=(4, 4, 2))
        r = g.normal(size=(4, 4, 2))
        got = prop.conv_w2(w, x.shape, r, (1, 1), "same")
        mat = conv_as_matrix(layer, x.shape, w)
        want = prop.dense_w2(mat, r.ravel())
        np.testing.assert_allclose(got.ravel(), want, atol=1e-10)


class TestDeepLIFTLinear:
    def test_hand_example(self):
        w = np.array([[1.0, -1.0]])
        dh = np.array([1.0, -1.0])
        p, n = prop.dense_deeplift(w, dh, np.array([1.0]), np.array([0.0]), ablation=False)
        np.testing.assert_array_equal(p, [1.0, 0.0])
        np.testing.assert_array_equal(n, [0.0, -1.0])

    def test_positive_net_reduces_to_masked_transpose(self):
        g = np.random.default_rng(18)
        w = np.abs(g.normal(size=(3, 4)))
        dh = np.abs(g.normal(size=4)) + 0.1
        r_pos = g.normal(size=3)
        p, n = prop.dense_deeplift(w, dh, r_pos, np.zeros(3), ablation=False)
        np.testing.assert_allclose(p, w.T @ r_pos)
        np.testing.assert_array_equal(n, np.zeros(4))

    def test_ablation_decouples_negative_chain(self):
        g = np.random.default_rng(19)
        w = np.abs(g.normal(size=(3, 4)))  # W- = 0
        dh = g.normal(size=4)
        p_out = np.abs(g.normal(size=3))
        n_out = -np.abs(g.normal(size=3))
        p, n = prop.dense_deeplift(w, dh, p_out, n_out, ablation=True)
        np.testing.assert_array_equal(n, np.zeros(4))  # no r+ leakage into r-
        np.testing.assert_allclose(p, np.where(dh > 0, w.T @ p_out, 0.0))

    def test_rescale_slope_and_fallback(self):
        z = np.array([2.0, -1.0, 1e-9])
        dz = np.array([2.0, 0.5, 1e-9])
        dh = np.array([2.0, 0.25, 1e-9])
        p, n = prop.deeplift_rescale(z, dz, dh, np.ones(3), -np.ones(3))
        np.testing.assert_allclose(p, [1.0, 0.5, 1.0])  # last one: mask fallback, z > 0
        np.testing.assert_allclose(n, [-1.0, -0.5, -1.0])
