"""Segmentation metrics: per-sample mean IoU (gIoU), cumulative IoU (cIoU),
and the four-dimension bucket report.

Conventions: a sample with empty prediction and empty ground truth scores
IoU 1 (and contributes nothing to the cumulative counts); empty ground truth
against a non-empty prediction scores 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAccumulator, ShapeMismatch, UnknownBucketLabel, ZeroUnion
from .masks import as_mask

__all__ = [
    "DIMENSIONS",
    "MetricsAccumulator",
    "LabeledSample",
    "DimensionReport",
    "dimension_report",
    "format_table",
]

# column order of the four-dimension report
DIMENSIONS: dict[str, tuple[str, ...]] = {
    "granularity": ("semantic", "instance", "part"),
    "multiplicity": ("single", "multiple"),
    "reasoning": ("explicit", "implicit"),
    "linguistic": ("short", "long"),
}


@dataclass
class MetricsAccumulator:
    per_sample_ious: list[float] = field(default_factory=list)
    cum_intersection: int = 0
    cum_union: int = 0

    def update(self, pred, gt) -> "MetricsAccumulator":
        p = as_mask(pred).astype(bool)
        g = as_mask(gt).astype(bool)
        if p.shape != g.shape:
            raise ShapeMismatch(f"prediction {p.shape} vs ground truth {g.shape}")
        inter = int((p & g).sum())
        union = int((p | g).sum())
        self.per_sample_ious.append(1.0 if union == 0 else inter / union)
        self.cum_intersection += inter
        self.cum_union += union
        return self

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        self.per_sample_ious.extend(other.per_sample_ious)
        self.cum_intersection += other.cum_intersection
        self.cum_union += other.cum_union
        return self

    @property
    def n(self) -> int:
        return len(self.per_sample_ious)

    def giou(self) -> float:
        if not self.per_sample_ious:
            raise EmptyAccumulator("no samples accumulated")
        return float(np.mean(self.per_sample_ious))

    def ciou(self) -> float:
        if self.cum_union == 0:
            raise ZeroUnion("cumulative union is zero")
        return self.cum_intersection / self.cum_union


@dataclass(frozen=True)
class LabeledSample:
    """One evaluated sample with its four dimension labels."""

    iou: float
    intersection: int
    union: int
    granularity: str
    multiplicity: str
    reasoning: str
    linguistic: str

    def label(self, dimension: str) -> str:
        return getattr(self, dimension)


@dataclass(frozen=True)
class DimensionReport:
    # (dimension, label) -> {"giou": float|None, "ciou": float|None, "n": int}
    buckets: dict[tuple[str, str], dict]
    overall: dict
    bucket_mean: dict  # mean of non-empty bucket columns (alternate reading)

    def to_json(self) -> dict:
        return {
            "buckets": {
                dim: {label: self.buckets[(dim, label)] for label in labels}
                for dim, labels in DIMENSIONS.items()
            },
            "overall": self.overall,
            "bucket_mean": self.bucket_mean,
        }


def _summarize(acc: MetricsAccumulator) -> dict:
    if acc.n == 0:
        return {"giou": None, "ciou": None, "n": 0}
    return {
        "giou": acc.giou(),
        "ciou": acc.ciou() if acc.cum_union > 0 else None,
        "n": acc.n,
    }


def dimension_report(samples: list[LabeledSample]) -> DimensionReport:
    """Per-bucket and whole-set metrics.

    The headline average is computed once over the full sample set; the mean
    over bucket columns is reported separately since buckets overlap across
    dimensions.
    """
    for s in samples:
        for dim, labels in DIMENSIONS.items():
            if s.label(dim) not in labels:
                raise UnknownBucketLabel(f"{dim} label {s.label(dim)!r} not in {labels}")
    overall = MetricsAccumulator()
    per_bucket = {
        (dim, label): MetricsAccumulator()
        for dim, labels in DIMENSIONS.items()
        for label in labels
    }
    for s in samples:
        overall.per_sample_ious.append(s.iou)
        overall.cum_intersection += s.intersection
        overall.cum_union += s.union
        for dim in DIMENSIONS:
            acc = per_bucket[(dim, s.label(dim))]
            acc.per_sample_ious.append(s.iou)
            acc.cum_intersection += s.intersection
            acc.cum_union += s.union

    buckets = {key: _summarize(acc) for key, acc in per_bucket.items()}
    filled = [b for b in buckets.values() if b["n"] > 0]
    bucket_mean = {
        "giou": float(np.mean([b["giou"] for b in filled])) if filled else None,
        "ciou": (
            float(np.mean([b["ciou"] for b in filled if b["ciou"] is not None]))
            if any(b["ciou"] is not None for b in filled)
            else None
        ),
    }
    return DimensionReport(buckets, _summarize(overall), bucket_mean)


def _cell(entry: dict) -> str:
    if entry["n"] == 0 or entry["giou"] is None:
        return "-/-"
    ciou = "-" if entry["ciou"] is None else f"{100 * entry['ciou']:.1f}"
    return f"{100 * entry['giou']:.1f}/{ciou}"


def format_table(report: DimensionReport) -> str:
    """Aligned text table, one gIoU/cIoU cell per bucket column plus Avg."""
    headers, cells = [], []
    for dim, labels in DIMENSIONS.items():
        for label in labels:
            headers.append(label.capitalize())
            cells.append(_cell(report.buckets[(dim, label)]))
    headers.append("Avg.")
    cells.append(_cell(report.overall))
    widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
    head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    body = "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    return head + "\n" + body
