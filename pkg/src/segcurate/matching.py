"""Candidate-mask selection: pairwise BCE+Dice costs and optimal assignment.

With k candidate masks and T targets (T <= k), every pair is scored and a
minimum-cost injective assignment is computed. The single-candidate,
single-target case is a structural bypass: no pair cost is ever evaluated.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ShapeMismatch, TooFewCandidates
from .losses import bce_loss, dice_loss

__all__ = [
    "EvalCounter",
    "CostMatrix",
    "AssignmentResult",
    "pair_cost",
    "cost_matrix",
    "hungarian",
    "select_masks",
    "sweep_queries",
    "DEFAULT_SWEEP_KS",
]

DEFAULT_COST_W_BCE = 5.0
DEFAULT_COST_W_DICE = 5.0
DEFAULT_SWEEP_KS = (100, 75, 50, 25, 10, 3, 1)
_PROB_CLAMP = 1e-6


class EvalCounter:
    """Thread-safe counter of pair-cost evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


@dataclass(frozen=True)
class CostMatrix:
    costs: np.ndarray  # (T, k)
    w_bce: float
    w_dice: float
    cost_evaluations: int


@dataclass(frozen=True)
class AssignmentResult:
    pairs: tuple[tuple[int, int], ...]  # (target index, candidate index)
    total_cost: float
    cost_evaluations: int
    bypassed: bool

    def to_json(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "total_cost": self.total_cost,
            "cost_evaluations": self.cost_evaluations,
            "bypassed": self.bypassed,
        }


def _as_prob_set(masks) -> np.ndarray:
    arr = np.asarray(masks, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ShapeMismatch(f"expected (n, H, W) masks, got shape {arr.shape}")
    if (arr < 0).any() or (arr > 1).any():
        raise ValueError("mask probabilities must lie in [0, 1]")
    return arr


def pair_cost(
    candidate,
    target,
    w_bce: float = DEFAULT_COST_W_BCE,
    w_dice: float = DEFAULT_COST_W_DICE,
) -> float:
    """Matching cost between one candidate probability grid and one target.

    BCE is evaluated on the log-odds of the candidate (clamped away from 0/1
    for finiteness); Dice on the raw probabilities.
    """
    p = np.asarray(candidate, dtype=float)
    g = np.asarray(target, dtype=float)
    if p.shape != g.shape:
        raise ShapeMismatch(f"candidate {p.shape} vs target {g.shape}")
    clamped = np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    logits = np.log(clamped / (1.0 - clamped))
    return w_bce * bce_loss(logits, g) + w_dice * dice_loss(p, g)


def cost_matrix(
    candidates,
    targets,
    w_bce: float = DEFAULT_COST_W_BCE,
    w_dice: float = DEFAULT_COST_W_DICE,
    jobs: int = 1,
    counter: EvalCounter | None = None,
) -> CostMatrix:
    """All T*k pair costs; rows may be computed in parallel."""
    cands = _as_prob_set(candidates)
    tgts = _as_prob_set(targets)
    k, t = cands.shape[0], tgts.shape[0]
    if cands.shape[1:] != tgts.shape[1:]:
        raise ShapeMismatch(f"candidate grids {cands.shape[1:]} vs targets {tgts.shape[1:]}")
    if t > k:
        raise TooFewCandidates(f"{t} targets but only {k} candidates")
    counter = counter or EvalCounter()

    def row(i: int) -> np.ndarray:
        values = np.array([pair_cost(cands[j], tgts[i], w_bce, w_dice) for j in range(k)])
        counter.add(k)
        return values

    if jobs > 1 and t > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, range(t)))
    else:
        rows = [row(i) for i in range(t)]
    return CostMatrix(np.stack(rows), w_bce, w_dice, counter.count)


def _optimal_cost(costs: np.ndarray) -> float:
    if costs.shape[0] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].sum())


def hungarian(matrix: CostMatrix) -> AssignmentResult:
    """Minimum-cost assignment of every target to a distinct candidate.

    Among equally optimal assignments the lexicographically smallest pair
    list is returned, so results are deterministic.
    """
    costs = np.asarray(matrix.costs, dtype=float)
    t, k = costs.shape
    if t > k:
        raise TooFewCandidates(f"{t} targets but only {k} candidates")
    if not np.isfinite(costs).all():
        raise ValueError("cost matrix entries must be finite")

    pairs: list[tuple[int, int]] = []
    available = list(range(k))
    remaining = costs
    for i in range(t):
        # smallest candidate index that still permits an optimal completion
        tails = [np.delete(remaining[1:], pos, axis=1) for pos in range(len(available))]
        completions = [remaining[0, pos] + _optimal_cost(tails[pos]) for pos in range(len(available))]
        best = min(completions)
        tol = 1e-12 * max(1.0, abs(best))
        pos = next(p for p, c in enumerate(completions) if c <= best + tol)
        pairs.append((i, available[pos]))
        available.pop(pos)
        remaining = tails[pos]
    total = float(sum(costs[i, j] for i, j in pairs))
    return AssignmentResult(tuple(pairs), total, matrix.cost_evaluations, False)


def select_masks(
    candidates,
    targets,
    w_bce: float = DEFAULT_COST_W_BCE,
    w_dice: float = DEFAULT_COST_W_DICE,
    jobs: int = 1,
) -> AssignmentResult:
    """Assign targets to candidates; the 1-candidate/1-target case bypasses
    matching entirely (zero cost evaluations)."""
    cands = _as_prob_set(candidates)
    tgts = _as_prob_set(targets)
    k, t = cands.shape[0], tgts.shape[0]
    if t > k:
        raise TooFewCandidates(f"{t} targets but only {k} candidates")
    if k == 1 and t == 1:
        return AssignmentResult(((0, 0),), 0.0, 0, True)
    return hungarian(cost_matrix(cands, tgts, w_bce, w_dice, jobs=jobs))


def sweep_queries(
    candidate_generator,
    targets,
    ks=DEFAULT_SWEEP_KS,
    w_bce: float = DEFAULT_COST_W_BCE,
    w_dice: float = DEFAULT_COST_W_DICE,
) -> list[dict]:
    """Evaluation-count and wall-time table over a range of candidate counts.

    ``candidate_generator(k)`` must yield a k-candidate set over the same
    targets.
    """
    rows = []
    for k in ks:
        cands = candidate_generator(k)
        start = time.perf_counter()
        result = select_masks(cands, targets, w_bce, w_dice)
        elapsed = time.perf_counter() - start
        rows.append(
            {
                "k": int(k),
                "cost_evaluations": result.cost_evaluations,
                "wall_time_s": elapsed,
                "bypassed": result.bypassed,
                "total_cost": result.total_cost,
            }
        )
    return rows
