"""Training-loss components with analytic gradients.

The spatial attention loss drives the attention mass that a segmentation
query places on foreground grid cells away from the mean background score:

    value = -log( mean over foreground cells of (A - a)^2 )

where A is the head/layer-averaged attention grid and a is the mean score
over background cells. The log argument is clamped at ``eps`` so the loss
stays finite when foreground and background scores coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    EmptyAfterIgnore,
    NoBackground,
    NonFiniteComponent,
    OutOfRange,
    ShapeMismatch,
    SkipNoBackground,
    SkipNoForeground,
    TargetOutOfVocab,
)

__all__ = [
    "LossWeights",
    "LossReport",
    "as_stack",
    "aggregate_attention",
    "background_mean",
    "spatial_attention_loss",
    "spatial_or_skip",
    "bce_loss",
    "bce_grad",
    "dice_loss",
    "dice_grad",
    "token_ce",
    "total_loss",
]

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    w_text: float = 1.0
    w_bce: float = 1.0
    w_dice: float = 1.0
    lambda_s: float = 0.01
    epsilon_log: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("w_text", "w_bce", "w_dice", "lambda_s", "epsilon_log"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class LossReport:
    l_text: float
    l_bce: float
    l_dice: float
    l_spatial: float
    total: float
    skipped_spatial: bool

    def to_json(self) -> dict:
        return {
            "l_text": self.l_text,
            "l_bce": self.l_bce,
            "l_dice": self.l_dice,
            "l_spatial": self.l_spatial,
            "total": self.total,
            "skipped_spatial": self.skipped_spatial,
        }


def as_stack(maps) -> np.ndarray:
    """Coerce to an (M, N, d, d) float stack of non-negative square grids."""
    try:
        arr = np.asarray(maps, dtype=float)
    except (ValueError, TypeError) as exc:
        raise ShapeMismatch("attention maps do not share a common shape") from exc
    if arr.ndim == 2:
        arr = arr[None, None]
    elif arr.ndim == 3:
        arr = arr[:, None]
    if arr.ndim != 4 or arr.shape[-1] != arr.shape[-2]:
        raise ShapeMismatch(f"expected (M, N, d, d) grids, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeMismatch("attention stack is empty")
    if (arr < 0).any():
        raise ValueError("attention scores must be non-negative")
    return arr


def _as_binary_grid(grid, d: int) -> np.ndarray:
    g = np.asarray(grid)
    if g.shape != (d, d):
        raise ShapeMismatch(f"ground-truth grid shape {g.shape} != ({d}, {d})")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("ground-truth grid must be binary")
    return g.astype(float)


def aggregate_attention(maps) -> np.ndarray:
    """Elementwise mean over all M*N attention maps."""
    stack = as_stack(maps)
    return stack.mean(axis=(0, 1))


def background_mean(a_s: np.ndarray, gt_grid) -> float:
    """Mean attention score over background (gt == 0) cells."""
    a_s = np.asarray(a_s, dtype=float)
    g = _as_binary_grid(gt_grid, a_s.shape[0])
    bg = 1.0 - g
    bg_count = bg.sum()
    if bg_count == 0:
        raise NoBackground("ground-truth grid has no background cell")
    return float((a_s * bg).sum() / bg_count)


def spatial_attention_loss(
    maps, gt_grid, eps: float = DEFAULT_EPS
) -> tuple[float, np.ndarray]:
    """Loss value and its analytic gradient w.r.t. every entry of every map.

    The gradient chains through both the stack mean and the background mean
    (which itself depends on the averaged grid). When the foreground
    separation underflows ``eps`` the log is clamped and the gradient is 0.
    Degenerate grids raise SkipNoForeground / SkipNoBackground: callers
    exclude the term rather than abort.
    """
    stack = as_stack(maps)
    mn = stack.shape[0] * stack.shape[1]
    d = stack.shape[-1]
    g = _as_binary_grid(gt_grid, d)
    fg_count = g.sum()
    bg_count = (1.0 - g).sum()
    if fg_count == 0:
        raise SkipNoForeground("no foreground cell in downsampled ground truth")
    if bg_count == 0:
        raise SkipNoBackground("no background cell in downsampled ground truth")

    a_s = stack.mean(axis=(0, 1))
    a = (a_s * (1.0 - g)).sum() / bg_count
    deviation = a_s - a
    separation = float((deviation**2 * g).sum() / fg_count)
    value = -math.log(max(separation, eps))

    if separation <= eps:
        grad = np.zeros_like(stack)
        return value, grad

    fg_dev_sum = (deviation * g).sum()
    # d(separation)/dA_S,  accounting for a's dependence on background cells
    grad_summary = (2.0 / fg_count) * (deviation * g - (1.0 - g) * fg_dev_sum / bg_count)
    grad_summary *= -1.0 / separation
    grad = np.broadcast_to(grad_summary / mn, stack.shape).copy()
    return value, grad


def spatial_or_skip(
    maps, gt_grid, eps: float = DEFAULT_EPS
) -> tuple[float, np.ndarray | None, bool]:
    """Like :func:`spatial_attention_loss` but maps skips to (0, None, True)."""
    try:
        value, grad = spatial_attention_loss(maps, gt_grid, eps)
    except (SkipNoForeground, SkipNoBackground):
        return 0.0, None, True
    return value, grad, False


def _match_shapes(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatch(f"shape {x.shape} != {y.shape}")
    return x, y


def bce_loss(logits, targets) -> float:
    """Mean binary cross-entropy on logits, log-sum-exp stable form."""
    x, y = _match_shapes(logits, targets)
    per_elem = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    return float(per_elem.mean())


def bce_grad(logits, targets) -> np.ndarray:
    x, y = _match_shapes(logits, targets)
    return (expit(x) - y) / x.size


def dice_loss(probs, gt, smooth: float = 1.0) -> float:
    p, g = _match_shapes(probs, gt)
    if (p < 0).any() or (p > 1).any():
        raise OutOfRange("probabilities must lie in [0, 1]")
    inter = (p * g).sum()
    return float(1.0 - (2.0 * inter + smooth) / (p.sum() + g.sum() + smooth))


def dice_grad(probs, gt, smooth: float = 1.0) -> np.ndarray:
    p, g = _match_shapes(probs, gt)
    if (p < 0).any() or (p > 1).any():
        raise OutOfRange("probabilities must lie in [0, 1]")
    inter = (p * g).sum()
    denom = p.sum() + g.sum() + smooth
    return -(2.0 * g * denom - (2.0 * inter + smooth)) / denom**2


def token_ce(logits, targets, ignore_id: int = -100) -> float:
    """Mean negative log-softmax of target ids over non-ignored positions."""
    x = np.asarray(logits, dtype=float)
    t = np.asarray(targets, dtype=int)
    if x.ndim != 2 or t.shape != (x.shape[0],):
        raise ShapeMismatch(f"expected (S, V) logits and (S,) targets, got {x.shape}, {t.shape}")
    keep = t != ignore_id
    if not keep.any():
        raise EmptyAfterIgnore("every position is ignored")
    kept_targets = t[keep]
    if (kept_targets < 0).any() or (kept_targets >= x.shape[1]).any():
        raise TargetOutOfVocab("target id outside vocabulary")
    rows = x[keep]
    row_max = rows.max(axis=1, keepdims=True)
    lse = row_max.squeeze(1) + np.log(np.exp(rows - row_max).sum(axis=1))
    picked = rows[np.arange(rows.shape[0]), kept_targets]
    return float((lse - picked).mean())


def total_loss(
    l_text: float,
    l_bce: float,
    l_dice: float,
    l_spatial: float | None,
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """Weighted sum of the four components; a skipped spatial term adds 0."""
    skipped = l_spatial is None
    spatial = 0.0 if skipped else float(l_spatial)
    parts = (l_text, l_bce, l_dice, spatial)
    if not all(math.isfinite(p) for p in parts):
        raise NonFiniteComponent(f"non-finite loss component in {parts}")
    total = (
        weights.w_text * l_text
        + weights.w_bce * l_bce
        + weights.w_dice * l_dice
        + weights.lambda_s * spatial
    )
    return LossReport(float(l_text), float(l_bce), float(l_dice), spatial, float(total), skipped)
