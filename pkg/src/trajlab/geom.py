"""Plane-constrained multi-view geometry.

World coordinates are meters, image coordinates pixels. A camera is a 3x4
projective matrix stored in a canonical scaling (unit third-row direction,
positive determinant of the left 3x3 block) so projectively equivalent
inputs behave identically everywhere downstream. The ground is a plane
fitted to a point sample and carried together with the rigid motion that
maps it onto z=0, so trajectories end up in a canonical metric frame.

All functions are pure; every value is immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateGeometry,
    IllConditioned,
    InvalidCamera,
    InvalidPlane,
    PointAtInfinity,
    RayParallelToPlane,
)

# Singular-value ratio (smallest over second smallest) at or above which a
# two-view-plus-plane system is treated as degenerate.
DEGENERATE_SV_RATIO = 0.5

# Ground planes whose unit normal has |z| below this are rejected: a
# near-vertical plane cannot serve as a walking surface.
MIN_GROUND_NORMAL_Z = 0.1

_W_CUTOFF = 1e-12
_DEHOM_CUTOFF = 1e-9
_RAY_CUTOFF = 1e-9


@dataclass(frozen=True)
class PixelPoint:
    """Continuous image coordinate in pixels."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pixel point must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def __iter__(self):
        return iter((self.x, self.y))


@dataclass(frozen=True)
class WorldPoint:
    """3D point in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"world point must be finite, got ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def __iter__(self):
        return iter((self.x, self.y, self.z))


def _xy(p) -> np.ndarray:
    if isinstance(p, PixelPoint):
        return p.as_array()
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"pixel point must be finite, got {a}")
    return a


def _xyz(p) -> np.ndarray:
    if isinstance(p, WorldPoint):
        return p.as_array()
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"world point must be finite, got {a}")
    return a


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CameraModel:
    """A calibrated finite camera.

    ``P`` is the 3x4 projection matrix mapping homogeneous world points to
    homogeneous pixels. On construction it is brought into a canonical
    scaling: the left 3 entries of the third row have unit norm and the
    left 3x3 block has positive determinant. Any nonzero scalar multiple
    of a given matrix therefore produces an identical model, and the
    homogeneous scale of a projected point equals its signed distance
    along the principal ray.
    """

    id: str
    P: np.ndarray
    width: int = 2048
    height: int = 1536

    def __post_init__(self):
        P = np.array(self.P, dtype=float).reshape(3, 4)
        if not np.all(np.isfinite(P)):
            raise InvalidCamera(f"camera {self.id!r}: non-finite entries in P")
        sv = np.linalg.svd(P, compute_uv=False)
        if sv[2] <= 1e-10 * sv[0]:
            raise InvalidCamera(f"camera {self.id!r}: P is rank-deficient")
        M = P[:, :3]
        det = np.linalg.det(M)
        if abs(det) <= 1e-12 * max(np.linalg.norm(M, "fro") ** 3, 1e-30):
            raise InvalidCamera(f"camera {self.id!r}: left 3x3 block is singular (not a finite camera)")
        P = P / np.linalg.norm(P[2, :3])
        if np.linalg.det(P[:, :3]) < 0:
            P = -P
        object.__setattr__(self, "P", _readonly(P))
        if not (int(self.width) > 0 and int(self.height) > 0):
            raise InvalidCamera(f"camera {self.id!r}: image size must be positive")

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -np.linalg.solve(self.P[:, :3], self.P[:, 3])


def project(cam: CameraModel, point) -> PixelPoint:
    """Project a world point into the image.

    Raises PointAtInfinity when the homogeneous scale is below cutoff,
    i.e. the point lies (numerically) on the camera's principal plane.
    """
    Xh = np.append(_xyz(point), 1.0)
    u = cam.P @ Xh
    if abs(u[2]) <= _W_CUTOFF:
        raise PointAtInfinity(f"camera {cam.id!r}: point {tuple(Xh[:3])} projects to infinity")
    return PixelPoint(u[0] / u[2], u[1] / u[2])


def project_batch(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of an (N,3) array.

    Returns (pixels (N,2), valid mask). Points with vanishing homogeneous
    scale are marked invalid instead of raising.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    u = pts @ cam.P[:, :3].T + cam.P[:, 3]
    valid = np.abs(u[:, 2]) > _W_CUTOFF
    w = np.where(valid, u[:, 2], 1.0)
    return u[:, :2] / w[:, None], valid


def dlt_rows(cam: CameraModel, obs) -> np.ndarray:
    """Two linear constraints on the homogeneous world point behind ``obs``.

    Eliminating the projective scale from the projection equation yields
    the rows (y*p3 - p2) and (p1 - x*p3); both annihilate any homogeneous
    world point consistent with the observation.
    """
    x, y = _xy(obs)
    P = cam.P
    return np.stack([y * P[2] - P[1], P[0] - x * P[2]])


def reprojection_error(cams_obs, point) -> float:
    """Mean Euclidean pixel distance between observations and the projection of ``point``."""
    if not cams_obs:
        raise ValueError("reprojection_error requires at least one observation")
    X = _xyz(point)
    total = 0.0
    for cam, obs in cams_obs:
        p = project(cam, X)
        o = _xy(obs)
        total += math.hypot(p.x - o[0], p.y - o[1])
    return total / len(cams_obs)


# --- ground plane -------------------------------------------------------------


def _minimal_rotation_to_z(n: np.ndarray) -> np.ndarray:
    # Rotation with the smallest angle taking unit vector n to (0,0,1).
    e3 = np.array([0.0, 0.0, 1.0])
    v = np.cross(n, e3)
    s2 = float(v @ v)
    c = float(n @ e3)
    if s2 <= 1e-30:
        return np.eye(3)
    K = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + K + K @ K * ((1.0 - c) / s2)


@dataclass(frozen=True, eq=False)
class PlaneModel:
    """Ground plane a*x + b*y + c*z + d = 0 with its canonical map to z=0.

    Coefficients are normalized to a unit normal with positive z component.
    ``rigid_to_z0`` is the 4x4 rigid transform (minimal rotation taking the
    normal to +z, followed by a pure z translation) that maps points on the
    plane to z=0 while preserving all pairwise distances.
    """

    coeffs: np.ndarray
    rigid_to_z0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(4)
        if not np.all(np.isfinite(c)):
            raise InvalidPlane("non-finite plane coefficients")
        nn = np.linalg.norm(c[:3])
        if nn <= 1e-12:
            raise InvalidPlane("plane normal is zero")
        c = c / nn
        if c[2] < 0:
            c = -c
        if c[2] < MIN_GROUND_NORMAL_Z:
            raise DegenerateGeometry(
                f"plane normal z={c[2]:.3f} is too close to vertical for a ground plane"
            )
        T = np.eye(4)
        T[:3, :3] = _minimal_rotation_to_z(c[:3])
        T[2, 3] = c[3]
        object.__setattr__(self, "coeffs", _readonly(c))
        object.__setattr__(self, "rigid_to_z0", _readonly(T))

    @property
    def normal(self) -> np.ndarray:
        return self.coeffs[:3]

    @property
    def offset(self) -> float:
        return float(self.coeffs[3])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ self.normal + self.offset


def _plane_coeffs(plane) -> np.ndarray:
    if isinstance(plane, PlaneModel):
        return plane.coeffs
    c = np.asarray(plane, dtype=float).reshape(4)
    if not np.all(np.isfinite(c)) or np.all(c == 0.0):
        raise InvalidPlane(f"unusable plane coefficients {tuple(c)}")
    return c


def tls_plane(points: np.ndarray) -> np.ndarray:
    """Total-least-squares plane through a point set.

    Returns raw coefficients (unit normal, arbitrary sign). Raises
    DegenerateGeometry when the points are collinear.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    centroid = pts.mean(axis=0)
    _, S, Vt = np.linalg.svd(pts - centroid, full_matrices=False)
    if S[1] <= 1e-9 * max(S[0], 1e-30):
        raise DegenerateGeometry("points are collinear; plane is not determined")
    normal = Vt[2]
    return np.append(normal, -float(normal @ centroid))


def _points_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        pts = points.astype(float).reshape(-1, 3)
    else:
        pts = np.array([_xyz(p) for p in points], dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError("plane fit input contains non-finite points")
    return pts


def fit_plane_ransac(
    points,
    iterations: int = 1000,
    inlier_tol_m: float = 0.02,
    seed: int = 0,
) -> tuple[PlaneModel, np.ndarray]:
    """Robust plane fit: RANSAC over 3-point samples, TLS refit on inliers.

    Deterministic for a fixed seed. Returns the normalized plane and the
    boolean inlier mask of the refit plane at ``inlier_tol_m``.
    """
    pts = _points_array(points)
    n = len(pts)
    if n < 3:
        raise DegenerateGeometry(f"plane fit needs at least 3 points, got {n}")
    rng = np.random.default_rng(seed)
    best_count = 0
    best_inliers = None
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        nrm = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(nrm)
        if norm <= 1e-12:
            continue
        nrm = nrm / norm
        dist = np.abs(pts @ nrm - float(nrm @ p0))
        count = int(np.count_nonzero(dist <= inlier_tol_m))
        if count > best_count:
            best_count = count
            best_inliers = dist <= inlier_tol_m
    if best_inliers is None:
        raise DegenerateGeometry("all RANSAC samples were degenerate (collinear input?)")
    plane = PlaneModel(tls_plane(pts[best_inliers]))
    final = np.abs(plane.signed_distance(pts)) <= inlier_tol_m
    return plane, final


def to_ground_frame(plane: PlaneModel, point) -> WorldPoint:
    """Apply the plane's rigid map; on-plane points land on z=0."""
    h = plane.rigid_to_z0 @ np.append(_xyz(point), 1.0)
    return WorldPoint(h[0], h[1], h[2])


def to_ground_frame_batch(plane: PlaneModel, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts @ plane.rigid_to_z0[:3, :3].T + plane.rigid_to_z0[:3, 3]


def project_onto_plane(plane: PlaneModel, points: np.ndarray) -> np.ndarray:
    """Orthogonal (shortest-distance) projection of (N,3) points onto the plane."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts - plane.signed_distance(pts)[:, None] * plane.normal


# --- plane-constrained triangulation ------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Diagnostics for one plane-constrained triangulation.

    ``sv_ratio`` is sigma_min/sigma_{min+1} of the row-normalized system;
    ``well_conditioned`` is true when the ratio is below
    DEGENERATE_SV_RATIO. ``same_camera`` marks inputs where both views
    came from one camera, which degenerates to a ray-plane intersection
    and must not be counted as a two-view estimate.
    """

    sv_ratio: float
    well_conditioned: bool
    same_camera: bool


def plane_system(cam_i: CameraModel, obs_i, cam_j: CameraModel, obs_j, plane) -> np.ndarray:
    """The 5x4 stacked constraint system (two DLT row pairs plus the plane).

    Rows are L2-normalized so the solve is invariant to the projective
    scale of either camera and the plane row is commensurate with the
    image rows.
    """
    coeffs = _plane_coeffs(plane)
    A = np.vstack([dlt_rows(cam_i, obs_i), dlt_rows(cam_j, obs_j), coeffs])
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def _solve_systems(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD-solve stacked (N,5,4) systems.

    Returns (solutions (N,3), sv ratios (N,), dehomogenization-ok (N,)).
    Solutions with unusable homogeneous scale are zero-filled and flagged.
    """
    _, S, Vt = np.linalg.svd(A)
    Xh = Vt[:, -1, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(S[:, 2] > 0.0, S[:, 3] / np.where(S[:, 2] > 0.0, S[:, 2], 1.0), 1.0)
    w = Xh[:, 3]
    ok = np.abs(w) > _DEHOM_CUTOFF
    safe_w = np.where(ok, w, 1.0)
    X = np.where(ok[:, None], Xh[:, :3] / safe_w[:, None], 0.0)
    return X, ratio, ok


def triangulate_batch(
    cam_i: CameraModel,
    obs_i: np.ndarray,
    cam_j: CameraModel,
    obs_j: np.ndarray,
    plane,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized plane-constrained triangulation of paired (N,2) observations.

    A first solve on the row-normalized system seeds two reweighting
    passes that bring every row into pixel-error units: camera rows are
    divided by the point's depth (so their algebraic residuals equal
    reprojection errors) and the plane row is scaled by the mean
    focal-over-depth factor (so a metric off-plane deviation costs the
    same as the image displacement it would cause). The refined solve
    tracks the reprojection-optimal point closely while staying a plain
    SVD null-vector computation.
    """
    coeffs = _plane_coeffs(plane)
    oi = np.asarray(obs_i, dtype=float).reshape(-1, 2)
    oj = np.asarray(obs_j, dtype=float).reshape(-1, 2)
    if len(oi) != len(oj):
        raise ValueError("observation arrays must have equal length")
    n = len(oi)
    Pi, Pj = cam_i.P, cam_j.P
    A = np.empty((n, 5, 4))
    A[:, 0] = oi[:, 1, None] * Pi[2] - Pi[1]
    A[:, 1] = Pi[0] - oi[:, 0, None] * Pi[2]
    A[:, 2] = oj[:, 1, None] * Pj[2] - Pj[1]
    A[:, 3] = Pj[0] - oj[:, 0, None] * Pj[2]
    A[:, 4] = coeffs
    A /= np.linalg.norm(A, axis=2, keepdims=True)
    X, ratio, ok = _solve_systems(A)

    f_i = np.linalg.norm(Pi[0, :3])
    f_j = np.linalg.norm(Pj[0, :3])
    # scale by the normal's norm so the row's residual is a metric distance
    unit_plane = coeffs / np.linalg.norm(coeffs[:3])
    B = np.empty_like(A)
    for _ in range(2):
        Xh = np.column_stack([X, np.ones(n)])
        d_i = np.maximum(np.abs(Xh @ Pi[2]), 1e-6)
        d_j = np.maximum(np.abs(Xh @ Pj[2]), 1e-6)
        B[:, 0] = (oi[:, 1, None] * Pi[2] - Pi[1]) / d_i[:, None]
        B[:, 1] = (Pi[0] - oi[:, 0, None] * Pi[2]) / d_i[:, None]
        B[:, 2] = (oj[:, 1, None] * Pj[2] - Pj[1]) / d_j[:, None]
        B[:, 3] = (Pj[0] - oj[:, 0, None] * Pj[2]) / d_j[:, None]
        B[:, 4] = unit_plane[None, :] * (0.5 * (f_i / d_i + f_j / d_j))[:, None]
        X_new, ratio_new, ok_new = _solve_systems(B)
        keep = ok & ok_new
        X = np.where(keep[:, None], X_new, X)
        ratio = np.where(keep, ratio_new, ratio)
    return X, ratio, ok


def triangulate_plane_constrained(
    cam_i: CameraModel,
    obs_i,
    cam_j: CameraModel,
    obs_j,
    plane,
) -> tuple[WorldPoint, ConditionReport]:
    """Recover the world point behind a pair of observations, biased to the plane.

    Solves the stacked 5x4 system by SVD; the returned point is the
    dehomogenized right singular vector of the smallest singular value,
    which globally minimizes the residual over all unit homogeneous
    vectors.
    """
    X, ratio, ok = triangulate_batch(cam_i, _xy(obs_i), cam_j, _xy(obs_j), plane)
    report = ConditionReport(
        sv_ratio=float(ratio[0]),
        well_conditioned=bool(ratio[0] < DEGENERATE_SV_RATIO),
        same_camera=cam_i.id == cam_j.id,
    )
    if not ok[0]:
        raise IllConditioned(
            f"cameras ({cam_i.id!r}, {cam_j.id!r}): homogeneous scale below {_DEHOM_CUTOFF}"
        )
    return WorldPoint(X[0, 0], X[0, 1], X[0, 2]), report


# --- single-view fallback -------------------------------------------------------


def backproject_batch(
    cam: CameraModel,
    obs: np.ndarray,
    plane: PlaneModel,
    height_offset_m: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Intersect camera rays with the plane lifted by ``height_offset_m``.

    Returns (points on the base plane (N,3), valid mask). Rays parallel to
    the plane are flagged invalid.
    """
    o = np.asarray(obs, dtype=float).reshape(-1, 2)
    M = cam.P[:, :3]
    C = cam.center
    dirs = np.linalg.solve(M, np.column_stack([o, np.ones(len(o))]).T).T
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    n = plane.normal
    denom = dirs @ n
    valid = np.abs(denom) > _RAY_CUTOFF
    d_off = plane.offset - height_offset_m
    t = -(float(n @ C) + d_off) / np.where(valid, denom, 1.0)
    hits = C + t[:, None] * dirs
    return hits - height_offset_m * n, valid


def backproject_to_plane(
    cam: CameraModel,
    obs,
    plane: PlaneModel,
    height_offset_m: float = 0.0,
) -> WorldPoint:
    """Single-view localization assuming the target sits ``height_offset_m``
    above the ground plane; the returned point is the ground contact point.
    """
    pts, valid = backproject_batch(cam, _xy(obs), plane, height_offset_m)
    if not valid[0]:
        raise RayParallelToPlane(f"camera {cam.id!r}: viewing ray is parallel to the plane")
    return WorldPoint(pts[0, 0], pts[0, 1], pts[0, 2])
