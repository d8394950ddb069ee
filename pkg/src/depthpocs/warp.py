"""Cross-view warping of depth maps for rectified pairs.

forward_warp lifts every source pixel to 3D and drops it into the target
view. Rectification keeps each sample on its source row, so samples are
bucketed per target row with a real-valued target column. interpolate_at
then rebuilds the target grid from two neighbors per pixel, one picked
from each side, and bilateral_filter cleans up the result.

For a rectified pair the composition of back-projection and re-projection
collapses to a pure column shift of fx * baseline / s per pixel, where s
is the distance along the shared camera axis. Using that closed form
keeps the identity warp (equal cameras) exact down to the bit.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from ._common import as_map, require_same_shape
from .errors import InvalidParameterError
from .geometry import CameraParams, projective_scale_grid, require_rectified


class ProjectedSample(NamedTuple):
    """One source pixel landed in the target view (row is preserved)."""

    row: int
    col: float
    depth: float
    src_row: int
    src_col: int


class RowSamples(NamedTuple):
    """All samples landing on one target row, as parallel arrays."""

    cols: np.ndarray
    depths: np.ndarray
    src_cols: np.ndarray

    def samples(self, row: int) -> list[ProjectedSample]:
        return [
            ProjectedSample(row, float(c), float(d), row, int(sc))
            for c, d, sc in zip(self.cols, self.depths, self.src_cols)
        ]


def forward_warp(
    src, src_cam: CameraParams, dst_cam: CameraParams
) -> list[RowSamples]:
    """Warp every positive-depth source pixel into the target view.

    Returns one RowSamples bucket per target row. Samples whose target
    column falls outside [-1, width] cannot influence any grid pixel and
    are dropped, as are pixels that end up behind the camera.
    """
    require_rectified(src_cam, dst_cam)
    m = as_map(src, "source map")
    h, w = m.shape
    if m.size == 0:
        return []
    scale = projective_scale_grid(src_cam, m)
    shift = src_cam.k[0, 0] * (dst_cam.t[0] - src_cam.t[0])
    cols = np.arange(w, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        dst_cols = cols[np.newaxis, :] + shift / scale
        # Landing columns are kept in 1/256-pixel fixed point. Surfaces whose
        # disparity is a whole number of columns must land exactly on grid
        # columns; tiny depth perturbations (filter tails, transform
        # round-off) would otherwise flip their interval membership at depth
        # edges and the interpolation would pick across the edge.
        dst_cols = np.round(dst_cols * 256.0) / 256.0
    valid = (
        (m > 0)
        & np.isfinite(scale)
        & (scale > 0)
        & (dst_cols >= -1.0)
        & (dst_cols <= float(w))
    )
    buckets = []
    for r in range(h):
        keep = valid[r]
        buckets.append(
            RowSamples(dst_cols[r][keep], m[r][keep], np.flatnonzero(keep))
        )
    return buckets


def _selection_key(depth: float, src_col: int, current: float, tau: float):
    # Lexicographic preference: pass the depth-tolerance filter first, then
    # smallest depth, then smallest source column for determinism.
    return (abs(depth - current) > tau, depth, src_col)


def interpolate_at(
    row: int,
    col: int,
    candidates: Sequence[ProjectedSample],
    current: float,
    tau: float,
) -> float:
    """Edge-adaptive depth at one integer target pixel.

    One candidate is picked from (col-1, col] and one from [col, col+1).
    Within each interval, candidates whose depth is within tau of the
    current target depth are preferred; among the preferred (or all, when
    none pass) the minimum depth wins. The two picks are blended linearly
    by horizontal distance; with a single pick its depth is returned, and
    with none the current value is kept.
    """
    c = float(col)
    p1 = None
    p2 = None
    k1 = None
    k2 = None
    for cand in candidates:
        x = cand.col
        if c - 1.0 < x <= c:
            key = _selection_key(cand.depth, cand.src_col, current, tau)
            if k1 is None or key < k1:
                k1, p1 = key, cand
        if c <= x < c + 1.0:
            key = _selection_key(cand.depth, cand.src_col, current, tau)
            if k2 is None or key < k2:
                k2, p2 = key, cand
    if p1 is not None and p2 is not None:
        t1 = c - p1.col
        t2 = p2.col - c
        if t1 == 0.0:
            return p1.depth
        if t2 == 0.0:
            return p2.depth
        return (p1.depth * t2 + p2.depth * t1) / (t1 + t2)
    if p1 is not None:
        return p1.depth
    if p2 is not None:
        return p2.depth
    return current


def _interpolate_grid(
    buckets: list[RowSamples], current: np.ndarray, tau: float
) -> np.ndarray:
    """Vectorized interpolate_at over the whole target grid.

    Each sample can serve exactly one pixel from the left (target ceil(col))
    and one from the right (target floor(col)), so both picks reduce to a
    grouped lexicographic minimum, done here with one lexsort per side.
    Produces bit-identical results to looping interpolate_at.
    """
    h, w = current.shape
    n = h * w
    if not buckets:
        return current.copy()
    rows = np.concatenate(
        [np.full(len(b.cols), r, dtype=np.int64) for r, b in enumerate(buckets)]
    )
    cols = np.concatenate([b.cols for b in buckets])
    depths = np.concatenate([b.depths for b in buckets])
    src_cols = np.concatenate([b.src_cols for b in buckets])
    flat_current = current.ravel()

    picked = []
    for side in ("left", "right"):
        targets = np.ceil(cols) if side == "left" else np.floor(cols)
        ok = (targets >= 0) & (targets < w)
        tgt = rows[ok] * w + targets[ok].astype(np.int64)
        d = depths[ok]
        fails = np.abs(d - flat_current[tgt]) > tau
        order = np.lexsort((src_cols[ok], d, fails, tgt))
        tgt_sorted = tgt[order]
        first = np.ones(len(tgt_sorted), dtype=bool)
        first[1:] = tgt_sorted[1:] != tgt_sorted[:-1]
        pick_d = np.full(n, np.nan)
        pick_c = np.full(n, np.nan)
        pick_d[tgt_sorted[first]] = d[order][first]
        pick_c[tgt_sorted[first]] = cols[ok][order][first]
        picked.append((pick_d, pick_c))

    (p1d, p1c), (p2d, p2c) = picked
    cgrid = np.tile(np.arange(w, dtype=np.float64), h)
    have1 = ~np.isnan(p1d)
    have2 = ~np.isnan(p2d)
    t1 = cgrid - p1c
    t2 = p2c - cgrid
    with np.errstate(invalid="ignore", divide="ignore"):
        blend = np.where(
            t1 == 0.0, p1d, np.where(t2 == 0.0, p2d, (p1d * t2 + p2d * t1) / (t1 + t2))
        )
    out = np.where(
        have1 & have2, blend, np.where(have1, p1d, np.where(have2, p2d, flat_current))
    )
    return out.reshape(h, w)


def bilateral_filter(
    map_, sigma_s: float, sigma_r: float, radius: int
) -> np.ndarray:
    """Edge-preserving smoothing with Gaussian spatial and range kernels.

    Windows are truncated at the borders and weights renormalized per
    pixel, so every output sample is a convex combination of input samples
    in its window. radius 0 is the documented off switch and returns a
    copy of the input.
    """
    m = as_map(map_)
    radius = int(radius)
    if radius < 0:
        raise InvalidParameterError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return m.copy()
    if sigma_s <= 0 or sigma_r <= 0:
        raise InvalidParameterError(
            f"sigmas must be positive, got sigma_s={sigma_s} sigma_r={sigma_r}"
        )
    h, w = m.shape
    # Accumulating weighted deviations from the center (instead of weighted
    # values) keeps flat regions exactly unchanged in floating point.
    num = np.zeros_like(m)
    den = np.zeros_like(m)
    inv2ss = 1.0 / (2.0 * sigma_s * sigma_s)
    inv2sr = 1.0 / (2.0 * sigma_r * sigma_r)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ws = math.exp(-(dy * dy + dx * dx) * inv2ss)
            y0, y1 = max(0, -dy), min(h, h - dy)
            x0, x1 = max(0, -dx), min(w, w - dx)
            if y0 >= y1 or x0 >= x1:
                continue
            center = m[y0:y1, x0:x1]
            neigh = m[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            diff = neigh - center
            wgt = ws * np.exp(-(diff * diff) * inv2sr)
            num[y0:y1, x0:x1] += wgt * diff
            den[y0:y1, x0:x1] += wgt
    return m + num / den


def project_view(
    src,
    src_cam: CameraParams,
    dst_cam: CameraParams,
    dst_current,
    *,
    tau: float = 8.0,
    sigma_s: float = 2.0,
    sigma_r: float = 10.0,
    radius: int = 3,
) -> np.ndarray:
    """Full view-to-view projection: warp, interpolate, bilateral filter.

    Target pixels that receive no candidates keep their dst_current value
    (before filtering). Deterministic for fixed inputs.
    """
    s = as_map(src, "source map")
    cur = as_map(dst_current, "target map")
    require_same_shape(s, cur, "project_view")
    buckets = forward_warp(s, src_cam, dst_cam)
    interp = _interpolate_grid(buckets, cur, tau)
    return bilateral_filter(interp, sigma_s, sigma_r, radius)
