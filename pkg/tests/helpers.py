"""Shared test fixtures and independent oracles."""

from __future__ import annotations

import numpy as np


def random_mask(rng, height, width, density=None) -> np.ndarray:
    p = rng.uniform(0.1, 0.9) if density is None else density
    return (rng.random((height, width)) < p).astype(np.uint8)


def flood_fill_count(mask: np.ndarray, connectivity: int = 8) -> int:
    """Independent component-count oracle: flood fill from every pixel."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    if connectivity == 8:
        neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neighbors = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    count = 0
    for r0 in range(h):
        for c0 in range(w):
            if mask[r0, c0] and not seen[r0, c0]:
                count += 1
                stack = [(r0, c0)]
                seen[r0, c0] = True
                while stack:
                    r, c = stack.pop()
                    for dr, dc in neighbors:
                        nr, nc = r + dr, c + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            stack.append((nr, nc))
    return count


def rect_mask(canvas_h, canvas_w, top, left, height, width) -> np.ndarray:
    m = np.zeros((canvas_h, canvas_w), dtype=np.uint8)
    m[top:top + height, left:left + width] = 1
    return m


# stage-2 filter fixture: 10 in-band rectangles plus 3 shape outliers
GOLD_WIDTHS = (14, 14, 14, 15, 15, 15, 15, 16, 16, 16)


def gold_rectangles() -> list[np.ndarray]:
    return [rect_mask(40, 40, 5, 5, 10, w) for w in GOLD_WIDTHS]


def outlier_masks() -> list[np.ndarray]:
    l_shape = np.zeros((40, 40), dtype=np.uint8)
    l_shape[5:25, 5:10] = 1
    l_shape[20:25, 5:25] = 1
    bar = np.zeros((40, 40), dtype=np.uint8)
    bar[5:6, 3:33] = 1
    plus = np.zeros((40, 40), dtype=np.uint8)
    plus[10:22, 15:17] = 1
    plus[15:17, 10:22] = 1
    return [l_shape, bar, plus]


def spatial_fd_gradient(stack: np.ndarray, gt_grid: np.ndarray,
                        h: float = 1e-5, eps: float = 1e-8) -> np.ndarray:
    """Central-difference oracle for the attention loss, direct formula only.

    Perturbing stack entry (m, n, i, j) by +/-h shifts the layer/head mean by
    exactly +/-h/(M*N) at cell (i, j), so the loss difference is evaluated on
    shifted aggregated grids (one per cell) and broadcast over (m, n). The
    value path below is a verbatim formula substitution, independent of the
    analytic gradient derivation.
    """
    m_blocks, n_heads, d, _ = stack.shape
    base = stack.mean(axis=(0, 1))
    shift = h / (m_blocks * n_heads)
    fg = gt_grid.astype(float)
    bg = 1.0 - fg

    def batch_loss(grids: np.ndarray) -> np.ndarray:
        a = (grids * bg).sum(axis=(1, 2)) / bg.sum()
        sep = (((grids - a[:, None, None]) ** 2) * fg).sum(axis=(1, 2)) / fg.sum()
        return -np.log(np.maximum(sep, eps))

    unit = np.eye(d * d).reshape(d * d, d, d)
    fd_cell = (batch_loss(base[None] + shift * unit)
               - batch_loss(base[None] - shift * unit)) / (2 * h)
    return np.broadcast_to(fd_cell.reshape(d, d), stack.shape)


def relative_errors(analytic: np.ndarray, fd: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    return np.abs(analytic - fd) / denom
