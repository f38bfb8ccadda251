import math

import numpy as np
import pytest

from trajlab import geom
from trajlab.geom import CameraModel, PlaneModel
from trajlab.synth import make_ring_cameras


@pytest.fixture
def down_camera() -> CameraModel:
    # looks straight down from z=10; projects (x, y, 0) to (x/10, y/10)
    return CameraModel("down", [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 10]], 2048, 1536)


@pytest.fixture
def oblique_camera() -> CameraModel:
    return lookat_camera("oblique", center=(9.0, -5.0, 6.0), f=900.0)


@pytest.fixture
def plane_z0() -> PlaneModel:
    return PlaneModel([0.0, 0.0, 1.0, 0.0])


@pytest.fixture
def ring_cameras() -> list[CameraModel]:
    return make_ring_cameras(
        count=3, radius=12.0, height=7.0, spacing_deg=90.0, arena_extent=16.0,
        width=2048, height_px=1536,
    )


def lookat_camera(cam_id, center, f=900.0, target=(0.0, 0.0, 0.0), width=2048, height=1536):
    """Standard pinhole camera at ``center`` looking at ``target``."""
    C = np.asarray(center, dtype=float)
    fwd = np.asarray(target, dtype=float) - C
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    right = right / np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])
    t = -R @ C
    K = np.array([[f, 0.0, width / 2.0], [0.0, f, height / 2.0], [0.0, 0.0, 1.0]])
    return CameraModel(cam_id, K @ np.hstack([R, t[:, None]]), width, height)


def random_camera(rng, cam_id="rand"):
    """A well-posed random camera on a ring looking near the origin."""
    theta = rng.uniform(0.0, 2.0 * math.pi)
    radius = rng.uniform(8.0, 16.0)
    height = rng.uniform(4.0, 9.0)
    C = (radius * math.cos(theta), radius * math.sin(theta), height)
    target = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0)
    return lookat_camera(cam_id, C, f=rng.uniform(700.0, 1200.0), target=target)


def tls_plane_oracle(points: np.ndarray) -> np.ndarray:
    """Independent total-least-squares plane fit, normalized with c >= 0."""
    pts = np.asarray(points, dtype=float)
    centroid = pts.mean(axis=0)
    cov = (pts - centroid).T @ (pts - centroid)
    w, v = np.linalg.eigh(cov)
    normal = v[:, 0]
    coeffs = np.append(normal, -normal @ centroid)
    coeffs = coeffs / np.linalg.norm(coeffs[:3])
    if coeffs[2] < 0:
        coeffs = -coeffs
    return coeffs


def grid_search_oracle(cams_obs, plane, center, half_m=0.03, step_m=0.001):
    """Brute-force reprojection-optimal point on the plane.

    Searches a dense grid (in the plane's own z=0 chart) around
    ``center`` minimizing the summed squared pixel error; independent of
    the SVD path it checks.
    """
    T = plane.rigid_to_z0
    T_inv = np.linalg.inv(T)
    c_ground = T @ np.append(np.asarray(center, dtype=float), 1.0)
    axis = np.arange(-half_m, half_m + step_m / 2, step_m)
    gx, gy = np.meshgrid(c_ground[0] + axis, c_ground[1] + axis)
    ground = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size), np.ones(gx.size)])
    world = ground @ T_inv.T
    sse = np.zeros(len(world))
    for cam, obs in cams_obs:
        proj = world @ cam.P.T
        uv = proj[:, :2] / proj[:, 2:3]
        o = np.asarray(tuple(obs), dtype=float)
        sse += np.sum((uv - o) ** 2, axis=1)
    best = world[int(np.argmin(sse))]
    return best[:3]


def exhaustive_min_assignment(cost: np.ndarray):
    """Exact minimum-total-cost assignment by branch and bound.

    Independent of scipy; explores row choices in ascending-cost order
    with a row-minima lower bound. Returns (row, col) pairs for all rows.
    """
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    assert n_rows <= n_cols
    suffix_min = np.zeros(n_rows + 1)
    for i in range(n_rows - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + cost[i].min()
    order = [np.argsort(cost[i], kind="stable") for i in range(n_rows)]
    best = {"total": np.inf, "cols": None}

    def rec(i, used, acc, cols):
        if acc + suffix_min[i] >= best["total"]:
            return
        if i == n_rows:
            best["total"] = acc
            best["cols"] = list(cols)
            return
        for j in order[i]:
            if used[j]:
                continue
            used[j] = True
            cols.append(int(j))
            rec(i + 1, used, acc + cost[i, j], cols)
            cols.pop()
            used[j] = False

    rec(0, np.zeros(n_cols, dtype=bool), 0.0, [])
    return [(i, j) for i, j in enumerate(best["cols"])]


def pair_trajectories(outputs, truths):
    """Match output trajectories to ground truth by minimal mean distance."""
    pairs = {}
    for traj in outputs:
        best = None
        for truth in truths:
            common, ia, ib = np.intersect1d(traj.frames, truth.frames, return_indices=True)
            if len(common) == 0:
                continue
            dist = float(np.mean(np.linalg.norm(traj.xy[ia] - truth.xy[ib], axis=1)))
            if best is None or dist < best[0]:
                best = (dist, truth)
        assert best is not None, f"no truth overlaps {traj.pedestrian_id}"
        pairs[traj.pedestrian_id] = best[1]
    return pairs


def rmse_vs_truth(outputs, truths) -> float:
    pairs = pair_trajectories(outputs, truths)
    sq = []
    for traj in outputs:
        truth = pairs[traj.pedestrian_id]
        common, ia, ib = np.intersect1d(traj.frames, truth.frames, return_indices=True)
        sq.append(np.sum((traj.xy[ia] - truth.xy[ib]) ** 2, axis=1))
    return float(np.sqrt(np.mean(np.concatenate(sq))))
