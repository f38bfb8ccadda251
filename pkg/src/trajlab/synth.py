"""Synthetic scene generation for end-to-end pipeline validation.

A scene holds ground-truth pedestrian walks on z=0, a ring of calibrated
cameras, per-camera 2D tracks obtained by projecting a swaying tracked
body point with pixel noise, luminance streams with a sync step, and
optionally a scripted cart. Everything is a deterministic function of the
spec's seed, and the generator keeps enough bookkeeping (clean projections
and drawn noise) that every pipeline claim can be checked against it.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import geom, ingest
from .cart import CartLabel
from .errors import InvalidSpec, ParseError
from .fuse import SEGMENT_IMPORTED, Segment, Trajectory3D
from .geom import CameraModel, PlaneModel
from .ingest import SessionManifest, Track2D
from .sync import LuminanceSeries

_BOX_W = 44.0
_BOX_H = 120.0


@dataclass
class SceneSpec:
    """Parameters of one synthetic recording session."""

    seed: int = 0
    session_id: str = "synth"
    arena_extent_m: float = 16.0
    camera_count: int = 3
    ring_radius_m: float = 14.0
    camera_height_m: float = 6.0
    angular_spacing_deg: float = 90.0
    image_width: int = 2048
    image_height: int = 1536
    pedestrian_count: int = 5
    speed_range_mps: tuple[float, float] = (0.8, 1.6)
    goal_change_prob_per_s: float = 0.05
    pixel_noise_px: float = 0.0
    sway_amplitude_m: float = 0.0
    sway_freq_hz: float = 1.8
    fps: float = 60.0
    duration_s: float = 5.0
    sync_frames: dict[str, int] | None = None
    layout: str = "random"
    ground_point_count: int = 400
    cart_tag_height_m: float | None = None
    cart_label_stride: int = 30
    output_fps: float | None = None

    def validate(self) -> None:
        checks = [
            (self.arena_extent_m > 2, "arena_extent_m must exceed 2 m"),
            (self.camera_count >= 1, "camera_count must be >= 1"),
            (self.ring_radius_m > 0, "ring_radius_m must be positive"),
            (self.camera_height_m > 0, "camera_height_m must be positive"),
            (self.pedestrian_count >= 0, "pedestrian_count must be >= 0"),
            (self.speed_range_mps[0] > 0, "speeds must be positive"),
            (self.speed_range_mps[1] >= self.speed_range_mps[0], "speed range inverted"),
            (self.pixel_noise_px >= 0, "pixel_noise_px must be >= 0"),
            (self.sway_amplitude_m >= 0, "sway_amplitude_m must be >= 0"),
            (self.fps > 0, "fps must be positive"),
            (self.duration_s > 0, "duration_s must be positive"),
            (self.layout in ("random", "lanes"), f"unknown layout {self.layout!r}"),
            (self.ground_point_count >= 3, "ground_point_count must be >= 3"),
            (self.cart_label_stride >= 1, "cart_label_stride must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidSpec(message)
        if self.sync_frames is not None and len(self.sync_frames) != self.camera_count:
            raise InvalidSpec("sync_frames must name every camera")


def load_scene_spec(path) -> SceneSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    known = {f for f in SceneSpec.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise InvalidSpec(f"unknown scene spec fields: {sorted(unknown)}")
    if "speed_range_mps" in doc:
        doc["speed_range_mps"] = tuple(doc["speed_range_mps"])
    spec = SceneSpec(**doc)
    spec.validate()
    return spec


@dataclass
class Scene:
    """A generated scene with ground truth and all pipeline inputs."""

    spec: SceneSpec
    cameras: list[CameraModel]
    truth: list[Trajectory3D]
    tracksets: dict[str, list[Track2D]]
    track_boxes: dict[str, list[tuple]]
    luminance: dict[str, LuminanceSeries]
    ground_points: np.ndarray
    sync_frames: dict[str, int]
    clean_pixels: dict[tuple[str, int], np.ndarray]
    pixel_noise: dict[tuple[str, int], np.ndarray]
    visible: dict[tuple[str, int], np.ndarray]
    cart_labels: list[CartLabel] = field(default_factory=list)
    cart_truth: Trajectory3D | None = None

    @property
    def camera_ids(self) -> list[str]:
        return [cam.id for cam in self.cameras]

    def offsets(self) -> dict[str, int]:
        ref = self.camera_ids[0]
        return {cid: self.sync_frames[cid] - self.sync_frames[ref] for cid in self.camera_ids}


def make_ring_cameras(
    count: int,
    radius: float,
    height: float,
    spacing_deg: float,
    arena_extent: float,
    width: int,
    height_px: int,
) -> list[CameraModel]:
    """Cameras on a ring looking at the arena center, focal length fitted
    so the whole arena projects inside 90% of the image."""
    cams = []
    target = np.zeros(3)
    up = np.array([0.0, 0.0, 1.0])
    half = arena_extent / 2.0
    corners = np.array(
        [[sx * half, sy * half, 0.0] for sx in (-1, 1) for sy in (-1, 1)] + [[0.0, 0.0, 0.0]]
    )
    for k in range(count):
        theta = math.radians(spacing_deg * k)
        C = np.array([radius * math.cos(theta), radius * math.sin(theta), height])
        fwd = target - C
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, up)
        right = right / np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd])
        t = -R @ C
        # normalized image coordinates of the arena corners bound the focal
        cam_pts = corners @ R.T + t
        nx = np.abs(cam_pts[:, 0] / cam_pts[:, 2]).max()
        ny = np.abs(cam_pts[:, 1] / cam_pts[:, 2]).max()
        f = min(0.45 * width / nx, 0.45 * height_px / ny)
        K = np.array([[f, 0.0, width / 2.0], [0.0, f, height_px / 2.0], [0.0, 0.0, 1.0]])
        P = K @ np.hstack([R, t[:, None]])
        cams.append(CameraModel(id=f"cam{k + 1}", P=P, width=width, height=height_px))
    return cams


def _walk_random(rng, spec: SceneSpec, n_frames: int) -> np.ndarray:
    half = spec.arena_extent_m / 2.0 - 1.0
    lo, hi = -half, half
    pos = rng.uniform(lo, hi, size=2)
    goal = rng.uniform(lo, hi, size=2)
    speed = rng.uniform(*spec.speed_range_mps)
    p_change = spec.goal_change_prob_per_s / spec.fps
    out = np.empty((n_frames, 2))
    for i in range(n_frames):
        out[i] = pos
        to_goal = goal - pos
        dist = float(np.linalg.norm(to_goal))
        step = speed / spec.fps
        if dist <= step or rng.random() < p_change:
            goal = rng.uniform(lo, hi, size=2)
            speed = rng.uniform(*spec.speed_range_mps)
            continue
        pos = pos + to_goal * (step / dist)
    return out


def _walk_lane(rng, spec: SceneSpec, n_frames: int, lane_y: float) -> np.ndarray:
    # ping-pong along x inside the arena; lanes never cross
    half = spec.arena_extent_m / 2.0 - 1.0
    span = 2.0 * half
    speed = rng.uniform(*spec.speed_range_mps)
    phase = rng.uniform(0.0, 2.0 * span)
    t = np.arange(n_frames) / spec.fps
    s = np.mod(phase + speed * t, 2.0 * span)
    x = np.where(s <= span, s, 2.0 * span - s) - half
    return np.column_stack([x, np.full(n_frames, lane_y)])


def generate(spec: SceneSpec) -> Scene:
    """Generate a scene; identical specs produce bit-identical scenes."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_frames = int(round(spec.duration_s * spec.fps))
    if n_frames < 2:
        raise InvalidSpec("duration too short for the frame rate")

    cams = make_ring_cameras(
        spec.camera_count,
        spec.ring_radius_m,
        spec.camera_height_m,
        spec.angular_spacing_deg,
        spec.arena_extent_m,
        spec.image_width,
        spec.image_height,
    )
    cam_ids = [c.id for c in cams]

    if spec.sync_frames is not None:
        missing = set(cam_ids) - set(spec.sync_frames)
        if missing:
            raise InvalidSpec(f"sync_frames missing cameras {sorted(missing)}")
        sync_frames = {cid: int(spec.sync_frames[cid]) for cid in cam_ids}
        if any(sync_frames[cid] < sync_frames[cam_ids[0]] for cid in cam_ids):
            raise InvalidSpec("the first camera must have the smallest sync frame")
    else:
        sync_frames = {cid: 10 + 6 * k for k, cid in enumerate(cam_ids)}

    # pedestrian ground-truth walks
    walks = []
    if spec.layout == "lanes":
        spacing = (spec.arena_extent_m - 2.0) / max(spec.pedestrian_count, 1)
        y0 = -(spec.arena_extent_m - 2.0) / 2.0 + spacing / 2.0
        for p in range(spec.pedestrian_count):
            walks.append(_walk_lane(rng, spec, n_frames, y0 + p * spacing))
    else:
        for _ in range(spec.pedestrian_count):
            walks.append(_walk_random(rng, spec, n_frames))
    sway_phase = rng.uniform(0.0, 2.0 * math.pi, size=max(spec.pedestrian_count, 1))

    frames = np.arange(n_frames, dtype=int)
    truth = [
        Trajectory3D(
            pedestrian_id=f"p{p}",
            frames=frames,
            xy=walks[p],
            segments=[Segment(0, n_frames - 1, SEGMENT_IMPORTED, (), 0.0)],
            enforce_speed_cap=False,
        )
        for p in range(spec.pedestrian_count)
    ]

    # tracked body point = foot position lifted by the vertical sway
    t_sec = frames / spec.fps
    sway = {
        p: spec.sway_amplitude_m * np.sin(2.0 * math.pi * spec.sway_freq_hz * t_sec + sway_phase[p])
        for p in range(spec.pedestrian_count)
    }

    ref = cam_ids[0]
    tracksets: dict[str, list[Track2D]] = {}
    track_boxes: dict[str, list[tuple]] = {}
    clean_pixels = {}
    pixel_noise = {}
    visible = {}
    for cam in cams:
        offset = sync_frames[cam.id] - sync_frames[ref]
        tracks = []
        boxes = []
        for p in range(spec.pedestrian_count):
            pts3 = np.column_stack([walks[p], sway[p]])
            clean, ok = geom.project_batch(cam, pts3)
            noise = (
                rng.normal(0.0, spec.pixel_noise_px, size=clean.shape)
                if spec.pixel_noise_px > 0
                else np.zeros_like(clean)
            )
            obs = clean + noise
            vis = (
                ok
                & (obs[:, 0] >= 0.0)
                & (obs[:, 0] <= cam.width)
                & (obs[:, 1] >= 0.0)
                & (obs[:, 1] <= cam.height)
            )
            clean_pixels[(cam.id, p)] = clean
            pixel_noise[(cam.id, p)] = noise
            visible[(cam.id, p)] = vis
            if not vis.any():
                continue
            local = frames[vis] + offset
            pts = obs[vis]
            tracks.append(
                Track2D(camera_id=cam.id, track_id=p, frames=local, points=pts)
            )
            for lf, (u, v) in zip(local, pts):
                boxes.append((int(lf), p, u - _BOX_W / 2.0, v - _BOX_H, _BOX_W, _BOX_H))
        tracksets[cam.id] = tracks
        track_boxes[cam.id] = boxes

    # luminance: dark until the sync flash, bright afterwards
    luminance = {}
    for cam in cams:
        offset = sync_frames[cam.id] - sync_frames[ref]
        n_local = n_frames + offset + 8
        lf = np.arange(n_local, dtype=int)
        values = np.where(lf < sync_frames[cam.id], 50.0, 200.0)
        luminance[cam.id] = LuminanceSeries(
            camera_id=cam.id, frames=lf, values=values, fps=spec.fps
        )

    ground_points = np.column_stack(
        [
            rng.uniform(-spec.arena_extent_m / 2, spec.arena_extent_m / 2, size=spec.ground_point_count),
            rng.uniform(-spec.arena_extent_m / 2, spec.arena_extent_m / 2, size=spec.ground_point_count),
            np.zeros(spec.ground_point_count),
        ]
    )

    cart_labels: list[CartLabel] = []
    cart_truth = None
    if spec.cart_tag_height_m is not None:
        h = float(spec.cart_tag_height_m)
        half = spec.arena_extent_m / 2.0 - 1.0
        cart_speed = 1.2
        span = 2.0 * half
        s = np.mod(cart_speed * t_sec, 2.0 * span)
        cart_x = np.where(s <= span, s - half, span - (s - span) - half)
        cart_xy = np.column_stack([cart_x, np.zeros(n_frames)])
        cart_truth = Trajectory3D(
            pedestrian_id="cart",
            frames=frames,
            xy=cart_xy,
            segments=[Segment(0, n_frames - 1, SEGMENT_IMPORTED, (), 0.0)],
            enforce_speed_cap=False,
        )
        tag_pts = np.column_stack([cart_xy, np.full(n_frames, h)])
        source = "tag" if h > 0 else "manual"
        for cam in cams:
            offset = sync_frames[cam.id] - sync_frames[ref]
            px, ok = geom.project_batch(cam, tag_pts)
            for g in range(0, n_frames, spec.cart_label_stride):
                if not ok[g]:
                    continue
                u, v = px[g]
                if 0.0 <= u <= cam.width and 0.0 <= v <= cam.height:
                    cart_labels.append(
                        CartLabel(camera_id=cam.id, frame=int(g + offset), x=float(u), y=float(v), source=source)
                    )

    return Scene(
        spec=spec,
        cameras=cams,
        truth=truth,
        tracksets=tracksets,
        track_boxes=track_boxes,
        luminance=luminance,
        ground_points=ground_points,
        sync_frames=sync_frames,
        clean_pixels=clean_pixels,
        pixel_noise=pixel_noise,
        visible=visible,
        cart_labels=cart_labels,
        cart_truth=cart_truth,
    )


def write_scene(scene: Scene, out_dir) -> str:
    """Write the full session tree; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    spec = scene.spec
    ingest.write_calibration(os.path.join(out_dir, "calibration.json"), scene.cameras)
    ingest.write_ground_points(os.path.join(out_dir, "ground_points.csv"), scene.ground_points)
    tracks = {}
    lum = {}
    for cid in scene.camera_ids:
        tracks[cid] = f"tracks_{cid}.csv"
        ingest.write_track_boxes(os.path.join(out_dir, tracks[cid]), scene.track_boxes[cid])
        lum[cid] = f"luminance_{cid}.csv"
        ingest.write_luminance(os.path.join(out_dir, lum[cid]), scene.luminance[cid])
    ingest.write_trajectories(
        os.path.join(out_dir, "truth.csv"), scene.truth, spec.fps, spec.session_id
    )
    manifest = SessionManifest(
        session_id=spec.session_id,
        calibration="calibration.json",
        tracks=tracks,
        ground_points="ground_points.csv",
        native_fps=spec.fps,
        output_fps=spec.output_fps if spec.output_fps else spec.fps,
        luminance=lum,
        seed=spec.seed,
        root=str(out_dir),
    )
    if scene.cart_labels:
        ingest.write_cart_labels(os.path.join(out_dir, "cart_labels.csv"), scene.cart_labels)
        ingest.write_trajectories(
            os.path.join(out_dir, "cart_truth.csv"), [scene.cart_truth], spec.fps, spec.session_id
        )
        manifest.cart_labels = "cart_labels.csv"
        manifest.cart_tag_height_m = spec.cart_tag_height_m
    manifest_path = os.path.join(out_dir, "manifest.json")
    ingest.save_manifest(manifest_path, manifest)
    return manifest_path
