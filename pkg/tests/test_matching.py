import itertools
import math

import numpy as np
import pytest

from segcurate import matching
from segcurate.errors import ShapeMismatch, TooFewCandidates
from segcurate.losses import bce_loss, dice_loss


def brute_force_min_cost(costs: np.ndarray) -> float:
    """Exhaustive minimum over all injective target->candidate assignments."""
    t, k = costs.shape
    best = math.inf
    for columns in itertools.permutations(range(k), t):
        best = min(best, sum(costs[i, j] for i, j in enumerate(columns)))
    return best


class TestPairCost:
    def test_perfect_candidate_near_zero(self):
        target = np.zeros((4, 4))
        target[1:3, 1:3] = 1
        assert matching.pair_cost(target.astype(float), target) < 1e-4

    def test_uniform_half_candidate(self):
        target = np.zeros((4, 4))
        target[0] = 1
        half = np.full((4, 4), 0.5)
        expected = 5.0 * bce_loss(np.zeros((4, 4)), target) + 5.0 * dice_loss(half, target)
        assert matching.pair_cost(half, target) == pytest.approx(expected, abs=1e-9)

    def test_disjoint_costs_more_than_perfect(self):
        target = np.zeros((4, 4))
        target[:2] = 1
        wrong = np.zeros((4, 4))
        wrong[2:] = 1
        assert matching.pair_cost(wrong, target) > matching.pair_cost(target.astype(float), target)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            matching.pair_cost(np.zeros((2, 2)), np.zeros((3, 3)))


class TestCostMatrix:
    def test_counts_t1_k3(self):
        cands = np.random.default_rng(0).random((3, 4, 4))
        target = (np.random.default_rng(1).random((1, 4, 4)) > 0.5).astype(float)
        cm = matching.cost_matrix(cands, target)
        assert cm.costs.shape == (1, 3)
        assert cm.cost_evaluations == 3

    def test_counts_t2_k2(self):
        rng = np.random.default_rng(2)
        cm = matching.cost_matrix(rng.random((2, 4, 4)),
                                  (rng.random((2, 4, 4)) > 0.5).astype(float))
        assert cm.cost_evaluations == 4

    def test_too_few_candidates(self):
        rng = np.random.default_rng(3)
        with pytest.raises(TooFewCandidates):
            matching.cost_matrix(rng.random((2, 4, 4)),
                                 (rng.random((3, 4, 4)) > 0.5).astype(float))

    def test_parallel_rows_match_serial(self):
        rng = np.random.default_rng(4)
        cands = rng.random((5, 6, 6))
        tgts = (rng.random((4, 6, 6)) > 0.5).astype(float)
        serial = matching.cost_matrix(cands, tgts, jobs=1)
        parallel = matching.cost_matrix(cands, tgts, jobs=4)
        assert np.allclose(serial.costs, parallel.costs)
        assert serial.cost_evaluations == parallel.cost_evaluations == 20


class TestHungarian:
    def _cm(self, costs):
        costs = np.asarray(costs, dtype=float)
        return matching.CostMatrix(costs, 5.0, 5.0, costs.size)

    def test_diagonal_optimum(self):
        result = matching.hungarian(self._cm([[0, 1], [1, 0]]))
        assert result.pairs == ((0, 0), (1, 1))
        assert result.total_cost == 0.0

    def test_row_argmin(self):
        result = matching.hungarian(self._cm([[0.5, 0.2, 0.9]]))
        assert result.pairs == ((0, 1),)
        assert result.total_cost == pytest.approx(0.2)

    def test_tie_breaks_lexicographically(self):
        result = matching.hungarian(self._cm([[0, 0], [0, 0]]))
        assert result.pairs == ((0, 0), (1, 1))
        result = matching.hungarian(self._cm([[1, 1, 0], [1, 1, 0]][:1]))
        assert result.pairs == ((0, 2),)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(77)
        for _ in range(60):
            t = int(rng.integers(1, 6))
            k = int(rng.integers(t, 7))
            costs = rng.random((t, k)) * 10
            result = matching.hungarian(self._cm(costs))
            assert result.total_cost == pytest.approx(brute_force_min_cost(costs), abs=1e-9)
            assert len({j for _, j in result.pairs}) == t  # injective

    def test_candidate_permutation_consistency(self):
        rng = np.random.default_rng(88)
        costs = rng.random((3, 5))
        base = matching.hungarian(self._cm(costs))
        perm = rng.permutation(5)
        permuted = matching.hungarian(self._cm(costs[:, perm]))
        assert permuted.total_cost == pytest.approx(base.total_cost, abs=1e-12)
        remapped = {(i, int(perm[j])) for i, j in permuted.pairs}
        assert {tuple(p) for p in base.pairs} == remapped or math.isclose(
            base.total_cost, permuted.total_cost)


class TestSelectMasks:
    def test_bypass_single_query(self):
        rng = np.random.default_rng(0)
        cand = rng.random((1, 4, 4))
        target = (rng.random((1, 4, 4)) > 0.5).astype(float)
        result = matching.select_masks(cand, target)
        assert result.bypassed
        assert result.pairs == ((0, 0),)
        assert result.cost_evaluations == 0

    def test_many_candidates_single_target(self):
        rng = np.random.default_rng(1)
        target = np.zeros((1, 4, 4))
        target[0, 1:3, 1:3] = 1
        cands = rng.random((100, 4, 4))
        cands[57] = target[0]  # plant the perfect candidate
        result = matching.select_masks(cands, target)
        assert not result.bypassed
        assert result.cost_evaluations == 100
        assert result.pairs == ((0, 57),)

    def test_injective_multi_target(self):
        rng = np.random.default_rng(2)
        cands = rng.random((3, 4, 4))
        targets = (rng.random((2, 4, 4)) > 0.5).astype(float)
        result = matching.select_masks(cands, targets)
        assert result.cost_evaluations == 6
        assert len({j for _, j in result.pairs}) == 2

    def test_too_few(self):
        rng = np.random.default_rng(3)
        with pytest.raises(TooFewCandidates):
            matching.select_masks(rng.random((2, 4, 4)),
                                  (rng.random((3, 4, 4)) > 0.5).astype(float))


class TestSweep:
    def _generator(self, seed=0, shape=(4, 4)):
        pool = np.random.default_rng(seed).random((100, *shape))

        def gen(k):
            return pool[:k]

        return gen

    def test_evaluation_counts_single_target(self):
        target = np.zeros((1, 4, 4))
        target[0, :2, :2] = 1
        rows = matching.sweep_queries(self._generator(), target)
        assert [r["k"] for r in rows] == [100, 75, 50, 25, 10, 3, 1]
        assert [r["cost_evaluations"] for r in rows] == [100, 75, 50, 25, 10, 3, 0]
        assert rows[-1]["bypassed"]

    def test_counts_monotone(self):
        target = np.zeros((1, 4, 4))
        target[0, :2, :2] = 1
        rows = matching.sweep_queries(self._generator(), target)
        evals = [r["cost_evaluations"] for r in rows]
        assert evals == sorted(evals, reverse=True)

    def test_empty_ks(self):
        target = np.zeros((1, 4, 4))
        target[0, :2, :2] = 1
        assert matching.sweep_queries(self._generator(), target, ks=()) == []


class TestEvalCounter:
    def test_concurrent_accumulation(self):
        import threading

        counter = matching.EvalCounter()

        def bump():
            for _ in range(1000):
                counter.add(1)

        threads = [threading.Thread(target=bump) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert counter.count == 8000
