import math

import numpy as np
import pytest

from segcurate import losses
from segcurate.errors import (
    EmptyAfterIgnore,
    NoBackground,
    NonFiniteComponent,
    OutOfRange,
    ShapeMismatch,
    SkipNoBackground,
    SkipNoForeground,
    TargetOutOfVocab,
)

from helpers import relative_errors, spatial_fd_gradient

A_HAND = np.array([[0.7, 0.1], [0.1, 0.1]])
G_HAND = np.array([[1, 0], [0, 0]])


class TestAggregate:
    def test_single_map_identity(self):
        m = np.array([[0.2, 0.3], [0.4, 0.5]])
        assert (losses.aggregate_attention(m) == m).all()

    def test_mean_of_two(self):
        out = losses.aggregate_attention([[[0.2]], [[0.4]]])
        assert out == pytest.approx(np.array([[0.3]]))

    def test_mismatched_shapes(self):
        with pytest.raises(ShapeMismatch):
            losses.aggregate_attention([np.zeros((2, 2)), np.zeros((3, 3))])

    def test_full_stack(self):
        rng = np.random.default_rng(0)
        stack = rng.random((3, 2, 4, 4))
        assert np.allclose(losses.aggregate_attention(stack), stack.mean(axis=(0, 1)))


class TestBackgroundMean:
    def test_hand_example(self):
        assert losses.background_mean(A_HAND, G_HAND) == pytest.approx(0.1)

    def test_all_background(self):
        assert losses.background_mean(A_HAND, np.zeros((2, 2), dtype=int)) == pytest.approx(
            A_HAND.mean())

    def test_no_background(self):
        with pytest.raises(NoBackground):
            losses.background_mean(A_HAND, np.ones((2, 2), dtype=int))


class TestSpatialLoss:
    def test_hand_example(self):
        value, grad = losses.spatial_attention_loss(A_HAND, G_HAND)
        assert value == pytest.approx(-math.log(0.36), abs=1e-12)
        assert grad.shape == (1, 1, 2, 2)

    def test_constant_map_clamps(self):
        value, grad = losses.spatial_attention_loss(np.full((2, 2), 0.5), G_HAND)
        assert value == pytest.approx(-math.log(1e-8))
        assert (grad == 0).all()

    def test_skip_signals(self):
        with pytest.raises(SkipNoForeground):
            losses.spatial_attention_loss(A_HAND, np.zeros((2, 2), dtype=int))
        with pytest.raises(SkipNoBackground):
            losses.spatial_attention_loss(A_HAND, np.ones((2, 2), dtype=int))

    def test_spatial_or_skip(self):
        value, grad, skipped = losses.spatial_or_skip(A_HAND, np.ones((2, 2), dtype=int))
        assert (value, grad, skipped) == (0.0, None, True)
        value, grad, skipped = losses.spatial_or_skip(A_HAND, G_HAND)
        assert not skipped and grad is not None

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(101)
        for _ in range(10):
            stack = rng.random((2, 3, 8, 8))
            grid = (rng.random((8, 8)) > 0.5).astype(int)
            if grid.sum() in (0, 64):
                continue
            _, analytic = losses.spatial_attention_loss(stack, grid)
            fd = spatial_fd_gradient(stack, grid)
            assert relative_errors(analytic, fd).max() < 1e-4

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        stack = rng.random((2, 4, 6, 6))
        grid = (rng.random((6, 6)) > 0.5).astype(int)
        value, _ = losses.spatial_attention_loss(stack, grid)
        flat = stack.reshape(8, 6, 6)
        shuffled = flat[rng.permutation(8)].reshape(2, 4, 6, 6)
        value2, _ = losses.spatial_attention_loss(shuffled, grid)
        assert value2 == pytest.approx(value, abs=1e-12)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            stack = rng.random((2, 2, 5, 5))
            grid = (rng.random((5, 5)) > 0.4).astype(int)
            if grid.sum() in (0, 25):
                continue
            value, _ = losses.spatial_attention_loss(stack, grid)
            shifted, _ = losses.spatial_attention_loss(stack + 0.37, grid)
            assert shifted == pytest.approx(value, abs=1e-9)

    def test_scaling_shifts_by_two_log(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            stack = rng.random((2, 2, 5, 5)) + 0.05
            grid = (rng.random((5, 5)) > 0.4).astype(int)
            if grid.sum() in (0, 25):
                continue
            s = rng.uniform(0.5, 3.0)
            value, _ = losses.spatial_attention_loss(stack, grid)
            scaled, _ = losses.spatial_attention_loss(s * stack, grid)
            assert scaled == pytest.approx(value - 2 * math.log(s), abs=1e-9)


class TestBce:
    def test_zero_logits(self):
        assert losses.bce_loss(np.zeros((3, 4)), np.ones((3, 4))) == pytest.approx(math.log(2))

    def test_saturated_correct(self):
        gt = np.array([[1.0, 0.0], [0.0, 1.0]])
        logits = np.where(gt == 1, 50.0, -50.0)
        assert losses.bce_loss(logits, gt) < 1e-9

    def test_saturated_wrong_linear_tail(self):
        assert losses.bce_loss(np.array([[50.0]]), np.array([[0.0]])) == pytest.approx(50.0, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            losses.bce_loss(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(0, 2, (6, 6))
        gt = (rng.random((6, 6)) > 0.5).astype(float)
        analytic = losses.bce_grad(logits, gt)
        h = 1e-5
        fd = np.zeros_like(logits)
        for i in range(6):
            for j in range(6):
                up, down = logits.copy(), logits.copy()
                up[i, j] += h
                down[i, j] -= h
                fd[i, j] = (losses.bce_loss(up, gt) - losses.bce_loss(down, gt)) / (2 * h)
        assert relative_errors(analytic, fd).max() < 1e-4


class TestDice:
    def test_perfect_overlap(self):
        m = np.zeros((4, 4))
        m[:2, :2] = 1
        assert losses.dice_loss(m, m) == 0.0

    def test_disjoint(self):
        p = np.zeros((2, 4))
        p[0] = 1
        g = np.zeros((2, 4))
        g[1] = 1
        assert losses.dice_loss(p, g) == pytest.approx(1 - 1 / 9)

    def test_both_empty(self):
        assert losses.dice_loss(np.zeros((3, 3)), np.zeros((3, 3))) == 0.0

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            losses.dice_loss(np.full((2, 2), 1.5), np.ones((2, 2)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        probs = rng.uniform(0.05, 0.95, (5, 5))
        gt = (rng.random((5, 5)) > 0.5).astype(float)
        analytic = losses.dice_grad(probs, gt)
        h = 1e-6
        fd = np.zeros_like(probs)
        for i in range(5):
            for j in range(5):
                up, down = probs.copy(), probs.copy()
                up[i, j] += h
                down[i, j] -= h
                fd[i, j] = (losses.dice_loss(up, gt) - losses.dice_loss(down, gt)) / (2 * h)
        assert relative_errors(analytic, fd).max() < 1e-4

    def test_bounded(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            p = rng.random((4, 4))
            g = (rng.random((4, 4)) > 0.5).astype(float)
            assert 0.0 <= losses.dice_loss(p, g) < 1.0


class TestTokenCe:
    def test_uniform_logits(self):
        assert losses.token_ce(np.zeros((3, 8)), np.array([0, 3, 7])) == pytest.approx(math.log(8))

    def test_confident_correct(self):
        logits = np.zeros((2, 5))
        logits[0, 1] = 50.0
        logits[1, 4] = 50.0
        assert losses.token_ce(logits, np.array([1, 4])) == pytest.approx(0.0, abs=1e-9)

    def test_all_ignored(self):
        with pytest.raises(EmptyAfterIgnore):
            losses.token_ce(np.zeros((2, 4)), np.array([-100, -100]))

    def test_ignored_positions_excluded(self):
        logits = np.zeros((2, 4))
        logits[0, 2] = 50.0
        value = losses.token_ce(logits, np.array([2, -100]))
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_target_out_of_vocab(self):
        with pytest.raises(TargetOutOfVocab):
            losses.token_ce(np.zeros((1, 4)), np.array([4]))


class TestTotalLoss:
    def test_weighted_sum(self):
        report = losses.total_loss(1.0, 2.0, 3.0, 0.5)
        assert report.total == pytest.approx(6.005)
        assert not report.skipped_spatial

    def test_lambda_zero_ignores_spatial(self):
        weights = losses.LossWeights(lambda_s=0.0)
        a = losses.total_loss(1.0, 1.0, 1.0, 100.0, weights)
        b = losses.total_loss(1.0, 1.0, 1.0, -5.0, weights)
        assert a.total == b.total == 3.0

    def test_skipped_spatial(self):
        report = losses.total_loss(1.0, 2.0, 3.0, None)
        assert report.skipped_spatial
        assert report.l_spatial == 0.0
        assert report.total == 6.0

    def test_non_finite(self):
        with pytest.raises(NonFiniteComponent):
            losses.total_loss(float("nan"), 0.0, 0.0, 0.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            losses.LossWeights(w_bce=-1.0)
