"""Shape descriptors for mask quality filtering.

Reported values follow fixed, versioned conventions (see ``CONVENTION``):
perimeter is the crack perimeter (unit pixel edges between foreground and
background/outside), the convex hull is taken over the four corner points of
every foreground pixel, and symmetry is the best reflective IoU across the
two principal axes through the centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask
from .masks import as_mask, connected_components, mask_to_bbox

__all__ = [
    "CONVENTION",
    "DESCRIPTOR_NAMES",
    "MomentSummary",
    "ShapeDescriptors",
    "moments",
    "eccentricity",
    "circularity",
    "solidity",
    "symmetry",
    "extent",
    "describe",
]

CONVENTION = "crack-perimeter.corner-hull.principal-axis-reflection-iou.v1"

DESCRIPTOR_NAMES = ("eccentricity", "circularity", "solidity", "symmetry", "extent")


@dataclass(frozen=True)
class MomentSummary:
    area: int
    centroid: tuple[float, float]  # (x, y)
    covariance: np.ndarray  # 2x2 second central moments of pixel centers


@dataclass(frozen=True)
class ShapeDescriptors:
    eccentricity: float
    circularity: float
    solidity: float
    symmetry: float
    extent: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in DESCRIPTOR_NAMES}


def _foreground_points(mask: np.ndarray) -> np.ndarray:
    """Pixel centers (x, y) of foreground pixels; pixel (r, c) -> (c+0.5, r+0.5)."""
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    return np.stack([cols + 0.5, rows + 0.5], axis=1)


def moments(mask: np.ndarray) -> MomentSummary:
    m = as_mask(mask)
    pts = _foreground_points(m)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    return MomentSummary(int(pts.shape[0]), (float(centroid[0]), float(centroid[1])), cov)


def eccentricity(summary: MomentSummary) -> float:
    """sqrt(1 - l2/l1) of covariance eigenvalues; 0 for zero-variance shapes."""
    l2, l1 = np.linalg.eigvalsh(summary.covariance)
    if l1 <= 1e-12:
        return 0.0
    ratio = min(max(l2 / l1, 0.0), 1.0)
    return float(np.sqrt(1.0 - ratio))


def _crack_perimeter(mask: np.ndarray) -> int:
    padded = np.pad(mask, 1)
    edges = 0
    for shift_axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        neighbor = np.roll(padded, shift, axis=shift_axis)
        edges += int(np.sum((padded == 1) & (neighbor == 0)))
    return edges


def circularity(mask: np.ndarray) -> float:
    """4*pi*area / perimeter^2 with the crack-perimeter convention."""
    m = as_mask(mask)
    area = int(m.sum())
    if area == 0:
        raise EmptyMask("mask has no foreground pixel")
    perim = _crack_perimeter(m)
    return float(4.0 * np.pi * area / perim**2)


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _convex_hull(points: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Andrew's monotone chain over integer points; returns CCW hull."""
    pts = sorted(set(points))
    if len(pts) == 1:
        return pts
    lower: list[tuple[int, int]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[int, int]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _polygon_area2(hull: list[tuple[int, int]]) -> int:
    """Twice the shoelace area (integer-exact)."""
    n = len(hull)
    acc = 0
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc)


def solidity(mask: np.ndarray) -> float:
    """Area over convex-hull area; hull spans pixel corners so it is never 0."""
    m = as_mask(mask)
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    corners: list[tuple[int, int]] = []
    for r, c in zip(rows.tolist(), cols.tolist()):
        corners.extend(((c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)))
    hull = _convex_hull(corners)
    hull_area = _polygon_area2(hull) / 2.0
    return float(rows.size / hull_area)


def _principal_axes(cov: np.ndarray) -> np.ndarray:
    """Two orthonormal axis directions; axis-aligned for isotropic shapes."""
    vals, vecs = np.linalg.eigh(cov)
    if abs(vals[1] - vals[0]) <= 1e-12 * max(abs(vals[1]), 1e-12):
        return np.eye(2)
    return vecs.T  # rows are directions


def symmetry(mask: np.ndarray) -> float:
    """Best IoU of the mask with its reflection across a principal axis.

    Reflected pixel centers are rasterized to the pixel containing them; a
    1e-7 nudge absorbs float noise at exact pixel boundaries.
    """
    m = as_mask(mask)
    pts = _foreground_points(m)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    original = set(map(tuple, np.floor(pts + 1e-7).astype(np.int64)))
    best = 0.0
    for u in _principal_axes(cov):
        reflect = 2.0 * np.outer(u, u) - np.eye(2)
        reflected = centered @ reflect.T + centroid
        mirrored = set(map(tuple, np.floor(reflected + 1e-7).astype(np.int64)))
        inter = len(original & mirrored)
        union = len(original | mirrored)
        best = max(best, inter / union)
    return float(best)


def extent(mask: np.ndarray) -> float:
    """Area over bounding-box area."""
    m = as_mask(mask)
    area = int(m.sum())
    if area == 0:
        raise EmptyMask("mask has no foreground pixel")
    box = mask_to_bbox(m)
    box_area = (box.x_max - box.x_min + 1) * (box.y_max - box.y_min + 1)
    return float(area / box_area)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels of the largest component (ties: smallest label)."""
    m = as_mask(mask)
    labeling = connected_components(m)
    if labeling.count == 0:
        raise EmptyMask("mask has no foreground pixel")
    sizes = np.bincount(labeling.labels.ravel(), minlength=labeling.count + 1)
    keep = int(np.argmax(sizes[1:])) + 1
    return (labeling.labels == keep).astype(np.uint8)


def describe(mask: np.ndarray) -> ShapeDescriptors:
    """All five descriptors, computed on the largest connected component."""
    component = largest_component(mask)
    return ShapeDescriptors(
        eccentricity=eccentricity(moments(component)),
        circularity=circularity(component),
        solidity=solidity(component),
        symmetry=symmetry(component),
        extent=extent(component),
    )
