"""Pinhole camera model shared by both views.

A pixel at (row, col) carrying depth value d corresponds to the world
point (x, y, d) whose homogeneous image vector (col, row, 1) is a positive
scalar multiple of K @ E @ (x, y, d, 1). The depth sample doubles as the
third world coordinate, which is what lets a rectified pair pass depth
values between views unchanged.

back_project eliminates the unknown scale by solving the 3x3 linear
system in (x, y, s) obtained from K^-1 @ (col, row, 1) * s = R @ p + t,
where s is the reciprocal of the scale and equals the point's distance
along the camera axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    BehindCameraError,
    InvalidConfigurationError,
    InvalidInputError,
    NoSolutionError,
)

_ORTHO_TOL = 1e-9


class WorldPoint(NamedTuple):
    x: float
    y: float
    d: float


@dataclass
class CameraParams:
    """Intrinsics k (3x3) and extrinsics e = [R | t] (3x4) of one view."""

    k: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=np.float64)
        self.e = np.asarray(self.e, dtype=np.float64)
        if self.k.shape != (3, 3):
            raise InvalidConfigurationError(f"K must be 3x3, got {self.k.shape}")
        if self.e.shape != (3, 4):
            raise InvalidConfigurationError(f"E must be 3x4, got {self.e.shape}")
        if not (np.all(np.isfinite(self.k)) and np.all(np.isfinite(self.e))):
            raise InvalidConfigurationError("camera matrices must be finite")
        lower = np.array([self.k[1, 0], self.k[2, 0], self.k[2, 1]])
        if np.any(lower != 0):
            raise InvalidConfigurationError("K must be upper triangular")
        if self.k[0, 0] <= 0 or self.k[1, 1] <= 0 or self.k[2, 2] != 1:
            raise InvalidConfigurationError(
                "K needs positive focal lengths and K[2][2] == 1"
            )
        r = self.e[:, :3]
        if np.max(np.abs(r.T @ r - np.eye(3))) > _ORTHO_TOL:
            raise InvalidConfigurationError("rotation part of E is not orthonormal")

    @property
    def r(self) -> np.ndarray:
        return self.e[:, :3]

    @property
    def t(self) -> np.ndarray:
        return self.e[:, 3]

    @property
    def fx(self) -> float:
        return float(self.k[0, 0])


def simple_camera(focal: float, cx: float, cy: float, tx: float = 0.0) -> CameraParams:
    """Axis-aligned camera: square pixels, R = I, translation along x."""
    k = np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
    e = np.hstack([np.eye(3), np.array([[tx], [0.0], [0.0]])])
    return CameraParams(k, e)


def is_rectified(a: CameraParams, b: CameraParams, tol: float = 1e-9) -> bool:
    """True when the two views share K and R and differ only in x-translation."""
    if np.max(np.abs(a.k - b.k)) > tol:
        return False
    if np.max(np.abs(a.r - b.r)) > tol:
        return False
    dt = a.t - b.t
    return abs(dt[1]) <= tol and abs(dt[2]) <= tol


def require_rectified(a: CameraParams, b: CameraParams) -> None:
    if not is_rectified(a, b):
        raise InvalidConfigurationError(
            "cameras are not a rectified pair (need shared K and R, baseline along x)"
        )


@dataclass
class RectifiedPair:
    """Two views with identical K and R and a baseline along the image x-axis."""

    left: CameraParams
    right: CameraParams

    def __post_init__(self):
        require_rectified(self.left, self.right)

    @property
    def baseline(self) -> float:
        return float(self.right.t[0] - self.left.t[0])


def _normalized_ray(row: float, col: float, cam: CameraParams) -> np.ndarray:
    """K^-1 @ (col, row, 1) by back substitution; third component is exactly 1."""
    k = cam.k
    my = (row - k[1, 2]) / k[1, 1]
    mx = (col - k[0, 1] * my - k[0, 2]) / k[0, 0]
    return np.array([mx, my, 1.0])


def back_project(row: float, col: float, depth: float, cam: CameraParams) -> WorldPoint:
    """Lift a pixel with a known depth value to its world point (x, y, depth).

    Solves the 3x3 system in (x, y, s); s is the positive distance along
    the camera axis and is not exposed.
    """
    if not np.isfinite(depth) or depth <= 0:
        raise InvalidInputError(f"depth must be positive and finite, got {depth}")
    m = _normalized_ray(row, col, cam)
    r = cam.r
    t = cam.t
    mat = np.array(
        [
            [r[0, 0], r[0, 1], -m[0]],
            [r[1, 0], r[1, 1], -m[1]],
            [r[2, 0], r[2, 1], -m[2]],
        ]
    )
    rhs = -(r[:, 2] * depth + t)
    try:
        x, y, s = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoSolutionError(
            f"pixel ({row}, {col}) is degenerate for this camera"
        ) from exc
    if not np.isfinite(s) or s <= 0:
        raise NoSolutionError(
            f"pixel ({row}, {col}) at depth {depth} has non-positive projective scale"
        )
    return WorldPoint(float(x), float(y), float(depth))


def project(point: WorldPoint, cam: CameraParams) -> tuple[float, float, float]:
    """Project a world point into a view; returns (row, col, depth).

    Row and column are real-valued (sub-pixel); the depth value passes
    through unchanged because it is the third world coordinate.
    """
    p = np.array([point.x, point.y, point.d], dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("world point must be finite")
    h = cam.k @ (cam.r @ p + cam.t)
    if h[2] <= 0:
        raise BehindCameraError(f"point {tuple(p)} projects behind the camera")
    return float(h[1] / h[2]), float(h[0] / h[2]), float(point.d)


def projective_scale_grid(cam: CameraParams, depth: np.ndarray) -> np.ndarray:
    """Per-pixel distance along the camera axis for a whole depth map.

    Vectorized Cramer solve of the same 3x3 system back_project uses,
    keeping only the scale s. Pixels with non-positive depth get NaN.
    """
    h, w = depth.shape
    k = cam.k
    r = cam.r
    t = cam.t
    rows = np.arange(h, dtype=np.float64).reshape(-1, 1)
    cols = np.arange(w, dtype=np.float64).reshape(1, -1)
    my = (rows - k[1, 2]) / k[1, 1]
    mx = (cols - k[0, 1] * my - k[0, 2]) / k[0, 0]

    minor = r[1, 0] * r[2, 1] - r[1, 1] * r[2, 0]
    det = (
        r[0, 0] * (-r[1, 1] + my * r[2, 1])
        - r[0, 1] * (-r[1, 0] + my * r[2, 0])
        - mx * minor
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        b0 = -(r[0, 2] * depth + t[0])
        b1 = -(r[1, 2] * depth + t[1])
        b2 = -(r[2, 2] * depth + t[2])
        det_s = (
            r[0, 0] * (r[1, 1] * b2 - b1 * r[2, 1])
            - r[0, 1] * (r[1, 0] * b2 - b1 * r[2, 0])
            + b0 * minor
        )
        s = det_s / det
    s = np.where(depth > 0, s, np.nan)
    return s
