"""Binary mask substrate: RLE codec, connected components, bboxes, grid downsampling.

Masks are 2-D numpy arrays with values in {0, 1} (row-major, uint8). The RLE
form is bit-exact: row-major runs, alternating starting with a background run
(the leading background run may have length 0, no later run may).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyMask,
    InteriorZeroRun,
    InvalidGridSize,
    RleError,
    RunSumMismatch,
)

__all__ = [
    "RleMask",
    "BBox",
    "ComponentLabeling",
    "as_mask",
    "rle_encode",
    "rle_decode",
    "connected_components",
    "mask_to_bbox",
    "downsample_gt",
]


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask.

    JSON form: ``{"h": int, "w": int, "runs": [int, ...]}``.
    """

    height: int
    width: int
    runs: tuple[int, ...]

    def to_json(self) -> dict:
        return {"h": self.height, "w": self.width, "runs": list(self.runs)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        try:
            return cls(int(obj["h"]), int(obj["w"]), tuple(int(r) for r in obj["runs"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise RleError(f"malformed RLE object: {exc}") from exc


@dataclass(frozen=True)
class BBox:
    """Inclusive pixel-index box, (x=column, y=row)."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def to_json(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_json(cls, obj) -> "BBox":
        x0, y0, x1, y1 = (int(v) for v in obj)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class ComponentLabeling:
    """Component ids per pixel: 0 = background, 1..count in first-encounter order."""

    labels: np.ndarray
    count: int


def as_mask(data) -> np.ndarray:
    """Coerce nested lists / arrays to a validated {0,1} uint8 mask."""
    m = np.asarray(data)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {m.shape}")
    if not np.isin(m, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return m.astype(np.uint8)


def rle_encode(mask: np.ndarray) -> RleMask:
    """Encode a binary mask; total function, inverse of :func:`rle_decode`."""
    m = as_mask(mask)
    flat = m.ravel()
    # boundaries between runs of equal values
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    runs = lengths.tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return RleMask(m.shape[0], m.shape[1], tuple(int(r) for r in runs))


def rle_decode(rle: RleMask) -> np.ndarray:
    """Decode back to a {0,1} uint8 array; validates the run invariants."""
    runs = rle.runs
    if any(r < 0 for r in runs):
        raise RleError("negative run length")
    if any(r == 0 for r in runs[1:]):
        raise InteriorZeroRun("zero-length run after the leading background run")
    total = sum(runs)
    expected = rle.height * rle.width
    if total != expected:
        raise RunSumMismatch(f"runs sum to {total}, expected {expected}")
    values = np.arange(len(runs)) % 2  # 0, 1, 0, 1, ...
    flat = np.repeat(values.astype(np.uint8), runs)
    return flat.reshape(rle.height, rle.width)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> ComponentLabeling:
    """Label connected foreground components.

    Labels are renumbered to first-encounter order in a row-major scan so the
    result is deterministic regardless of the labeling backend.
    """
    m = as_mask(mask)
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=np.uint8)
    elif connectivity == 4:
        structure = None  # ndimage default
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    raw, count = ndimage.label(m, structure=structure)
    if count == 0:
        return ComponentLabeling(np.zeros_like(m, dtype=np.int32), 0)
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    remap = np.zeros(count + 1, dtype=np.int32)
    next_id = 0
    for idx in nz:
        lab = flat[idx]
        if remap[lab] == 0:
            next_id += 1
            remap[lab] = next_id
    return ComponentLabeling(remap[raw].astype(np.int32), count)


def mask_to_bbox(mask: np.ndarray) -> BBox:
    """Tightest inclusive box around all foreground pixels."""
    m = as_mask(mask)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    cols = np.flatnonzero(m.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


def downsample_gt(mask: np.ndarray, d: int) -> np.ndarray:
    """Downsample to a d×d binary grid with the any-overlap rule.

    Cell (i, j) covers rows [floor(i*H/d), floor((i+1)*H/d)) and the analogous
    column band; it is 1 iff the band contains at least one foreground pixel.
    Any-overlap (rather than majority) keeps objects spanning only a few
    pixels visible at grid resolution.
    """
    m = as_mask(mask)
    h, w = m.shape
    if d < 1 or h < d or w < d:
        raise InvalidGridSize(f"grid size {d} invalid for {h}x{w} mask")
    row_edges = (np.arange(d + 1) * h) // d
    col_edges = (np.arange(d + 1) * w) // d
    grid = np.zeros((d, d), dtype=np.uint8)
    for i in range(d):
        band = m[row_edges[i]:row_edges[i + 1]]
        for j in range(d):
            if band[:, col_edges[j]:col_edges[j + 1]].any():
                grid[i, j] = 1
    return grid
