"""Point-prompt grid generation and automatic mask filtering.

The stage-2 filter combines a component-count consistency check with a
per-category acceptable-range test: descriptor bounds are mean +/- k*std
derived from a small gold reference set of manually verified masks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import InsufficientGold, MissingCategoryStats, RegionTooSmall
from .masks import connected_components

__all__ = [
    "GridSpec",
    "PointPrompt",
    "ReferenceStats",
    "FilterVerdict",
    "Stage2Item",
    "Stage2Summary",
    "global_grid",
    "local_grid",
    "count_consistency",
    "derive_reference_stats",
    "range_filter",
    "run_stage2",
]

ASPECT_THRESHOLD = 2.5  # elongated crops get a 1-column grid


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int


@dataclass(frozen=True)
class PointPrompt:
    x: float
    y: float


@dataclass(frozen=True)
class ReferenceStats:
    """Per-descriptor gold-set statistics (sample std, n-1 denominator)."""

    category: str
    n: int
    metrics: dict[str, tuple[float, float]]  # name -> (mean, std)
    convention: str = geometry.CONVENTION

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "convention": self.convention,
            "n": self.n,
            "metrics": {k: {"mean": m, "std": s} for k, (m, s) in self.metrics.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReferenceStats":
        metrics = {k: (float(v["mean"]), float(v["std"])) for k, v in obj["metrics"].items()}
        return cls(obj["category"], int(obj["n"]), metrics, obj.get("convention", geometry.CONVENTION))


@dataclass(frozen=True)
class FilterVerdict:
    passed: bool
    failures: tuple[tuple[str, float, float, float], ...]  # (name, value, lo, hi)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "failures": [
                {"descriptor": n, "value": v, "lower": lo, "upper": hi}
                for n, v, lo, hi in self.failures
            ],
        }


def global_grid(width: int, height: int) -> list[PointPrompt]:
    """Uniform 4x4 grid of 16 prompts at cell centers, row-major order."""
    if width < 4 or height < 4:
        raise RegionTooSmall(f"image {width}x{height} too small for a 4x4 grid")
    points = []
    for r in range(4):
        for c in range(4):
            points.append(PointPrompt((2 * c + 1) * width / 8.0, (2 * r + 1) * height / 8.0))
    return points


def local_grid(h: int, w: int) -> GridSpec:
    """Grid dimensions for a cropped region.

    Elongated crops (aspect ratio >= 2.5) get a single column of
    ceil(ratio)+1 rows laid along the longer side; otherwise 4x4.
    """
    if h < 1 or w < 1:
        raise ValueError(f"crop must be at least 1x1, got {h}x{w}")
    ratio = max(h, w) / min(h, w)
    if ratio >= ASPECT_THRESHOLD:
        return GridSpec(math.ceil(ratio) + 1, 1)
    return GridSpec(4, 4)


def count_consistency(mask: np.ndarray, bbox_count: int, connectivity: int = 8) -> bool:
    """Pass iff the component count matches the box count and is at least 1."""
    count = connected_components(mask, connectivity).count
    return count == bbox_count and count >= 1


def derive_reference_stats(category: str, gold: list[np.ndarray]) -> ReferenceStats:
    if len(gold) < 2:
        raise InsufficientGold(f"need at least 2 gold masks, got {len(gold)}")
    values: dict[str, list[float]] = {name: [] for name in geometry.DESCRIPTOR_NAMES}
    for mask in gold:
        descriptors = geometry.describe(mask)  # raises EmptyMask on empty gold
        for name, value in descriptors.as_dict().items():
            values[name].append(value)
    metrics = {}
    for name, vals in values.items():
        # zero spread must give exactly zero std (degenerate filter band)
        std = 0.0 if min(vals) == max(vals) else float(np.std(vals, ddof=1))
        metrics[name] = (float(np.mean(vals)), std)
    return ReferenceStats(category, len(gold), metrics)


def range_filter(
    descriptors: geometry.ShapeDescriptors,
    stats: ReferenceStats,
    k_sigma: float = 2.0,
) -> FilterVerdict:
    """Check every descriptor against [mean - k*std, mean + k*std]."""
    failures = []
    for name, value in descriptors.as_dict().items():
        mean, std = stats.metrics[name]
        lo, hi = mean - k_sigma * std, mean + k_sigma * std
        if not (lo <= value <= hi):
            failures.append((name, value, lo, hi))
    return FilterVerdict(not failures, tuple(failures))


@dataclass(frozen=True)
class Stage2Item:
    item_id: str
    mask: np.ndarray
    bbox_count: int
    category: str


@dataclass
class Stage2Summary:
    input: int = 0
    kept: int = 0
    dropped_by_count: int = 0
    dropped_by_range: int = 0

    def to_json(self) -> dict:
        return {
            "input": self.input,
            "kept": self.kept,
            "dropped_by_count": self.dropped_by_count,
            "dropped_by_range": self.dropped_by_range,
        }


@dataclass(frozen=True)
class Stage2Result:
    item_id: str
    verdict: FilterVerdict
    reason: str | None  # None (kept), "count", or "range"

    def to_json(self) -> dict:
        out = {"id": self.item_id, "reason": self.reason}
        out.update(self.verdict.to_json())
        return out


def _check_item(item: Stage2Item, stats: ReferenceStats, k_sigma: float) -> Stage2Result:
    if not count_consistency(item.mask, item.bbox_count):
        return Stage2Result(item.item_id, FilterVerdict(False, ()), "count")
    verdict = range_filter(geometry.describe(item.mask), stats, k_sigma)
    return Stage2Result(item.item_id, verdict, None if verdict.passed else "range")


def run_stage2(
    items: list[Stage2Item],
    stats_by_category: dict[str, ReferenceStats],
    k_sigma: float = 2.0,
    jobs: int = 1,
) -> tuple[list[Stage2Result], Stage2Summary]:
    """Filter a batch; items are independent, summary is order-free counts."""
    for item in items:
        if item.category not in stats_by_category:
            raise MissingCategoryStats(f"no reference stats for category {item.category!r}")
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda it: _check_item(it, stats_by_category[it.category], k_sigma),
                    items,
                )
            )
    else:
        results = [_check_item(it, stats_by_category[it.category], k_sigma) for it in items]
    summary = Stage2Summary(input=len(items))
    for res in results:
        if res.reason == "count":
            summary.dropped_by_count += 1
        elif res.reason == "range":
            summary.dropped_by_range += 1
        else:
            summary.kept += 1
    return results, summary
