"""Session orchestration: pipeline stages over a manifest, statistics,
and the mutable state behind the review service.

Stage artifacts live next to the manifest: plane.json, alignment.json,
fused.json (full state of the from-scratch fusion), trajectories.csv,
cart.csv, corrections.json, export.csv. The current review state is
always reproducible as "fuse from scratch, then replay the correction
log in order".
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cart as cart_mod
from . import fuse as fuse_mod
from . import geom, ingest, sync
from .errors import ParseError, RefuseInProgress
from .fuse import Correction, Trajectory3D
from .geom import CameraModel, PlaneModel
from .ingest import SessionManifest
from .sync import TimeAlignment

logger = logging.getLogger(__name__)

PLANE_FILE = "plane.json"
ALIGNMENT_FILE = "alignment.json"
FUSED_FILE = "fused.json"
TRAJECTORIES_FILE = "trajectories.csv"
CART_FILE = "cart.csv"
CORRECTIONS_FILE = "corrections.json"
EXPORT_FILE = "export.csv"


@dataclass
class FuseParams:
    max_mean_reproj_px: float = 15.0
    min_overlap_frames: int = 30
    max_gap_s: float = 0.5
    v_max_mps: float = 4.0
    min_duration_s: float = 1.0
    reproj_warn_px: float = 10.0
    workers: int = 1


@dataclass
class SessionInputs:
    manifest: SessionManifest
    cameras: dict[str, CameraModel]
    tracksets: dict[str, list]
    luminance: dict[str, sync.LuminanceSeries]
    ground_points: np.ndarray
    cart_labels: list


def load_inputs(manifest: SessionManifest) -> SessionInputs:
    cameras = {
        cam.id: cam for cam in ingest.load_calibration(manifest.resolve(manifest.calibration))
    }
    tracksets = {}
    for cid, rel in sorted(manifest.tracks.items()):
        cam = cameras[cid]
        tracksets[cid] = ingest.load_tracks(manifest.resolve(rel), cid, cam.width, cam.height)
    luminance = {
        cid: ingest.load_luminance(manifest.resolve(rel), cid, manifest.native_fps)
        for cid, rel in sorted(manifest.luminance.items())
    }
    ground_points = ingest.load_ground_points(manifest.resolve(manifest.ground_points))
    cart_labels = []
    if manifest.cart_labels:
        cart_labels = ingest.load_cart_labels(manifest.resolve(manifest.cart_labels), cameras)
    return SessionInputs(
        manifest=manifest,
        cameras=cameras,
        tracksets=tracksets,
        luminance=luminance,
        ground_points=ground_points,
        cart_labels=cart_labels,
    )


# --- stages -------------------------------------------------------------------


def stage_fit_plane(inputs: SessionInputs, seed: int | None = None) -> tuple[PlaneModel, np.ndarray]:
    effective = inputs.manifest.seed if seed is None else seed
    return geom.fit_plane_ransac(inputs.ground_points, seed=effective)


def stage_sync(inputs: SessionInputs) -> TimeAlignment:
    cam_ids = sorted(inputs.cameras)
    reference = cam_ids[0]
    if not inputs.luminance:
        logger.warning("no luminance files in manifest; assuming pre-synchronized cameras")
        return sync.TimeAlignment(
            reference_camera_id=reference,
            offsets={cid: 0 for cid in cam_ids},
            fps=inputs.manifest.native_fps,
        )
    events = {
        cid: sync.detect_sync_event(series) for cid, series in sorted(inputs.luminance.items())
    }
    return sync.align(events, reference=reference, fps=inputs.manifest.native_fps)


def stage_fuse(
    inputs: SessionInputs,
    plane: PlaneModel,
    alignment: TimeAlignment,
    params: FuseParams | None = None,
) -> list[Trajectory3D]:
    """Associate, fuse, interpolate, and flag; deterministic for any worker count."""
    params = params or FuseParams()
    fps = inputs.manifest.native_fps
    groups = fuse_mod.associate(
        inputs.tracksets,
        inputs.cameras,
        plane,
        alignment,
        max_mean_reproj_px=params.max_mean_reproj_px,
        min_overlap_frames=params.min_overlap_frames,
        workers=params.workers,
    )

    def fuse_one(indexed):
        idx, group = indexed
        return fuse_mod.fuse_group(group, inputs.cameras, plane, alignment, pedestrian_id=f"p{idx}")

    jobs = list(enumerate(groups))
    if params.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            fused = list(pool.map(fuse_one, jobs))
    else:
        fused = [fuse_one(job) for job in jobs]

    out: list[Trajectory3D] = []
    for traj in fused:
        out.extend(fuse_mod.interpolate_gaps(traj, params.max_gap_s, fps))
    flagged = []
    for traj in out:
        flags = fuse_mod.flag_anomalies(
            traj,
            fps,
            v_max_mps=params.v_max_mps,
            min_duration_s=params.min_duration_s,
            reproj_warn_px=params.reproj_warn_px,
        )
        flagged.append(fuse_mod.remake(traj, flags=flags))
    flagged.sort(key=lambda t: t.pedestrian_id)
    return flagged


def stage_cart(
    inputs: SessionInputs, plane: PlaneModel, alignment: TimeAlignment
) -> Trajectory3D:
    tag_height = inputs.manifest.cart_tag_height_m or 0.0
    return cart_mod.localize_cart(
        inputs.cart_labels,
        inputs.cameras,
        plane,
        alignment,
        tag_height_m=tag_height,
        output_fps=inputs.manifest.output_fps,
    )


def stage_export(
    trajectories: list[Trajectory3D],
    native_fps: float,
    output_fps: float,
    corrections: list[Correction] | None = None,
    smooth_window: int | None = None,
) -> list[Trajectory3D]:
    out = list(trajectories)
    if corrections:
        out = fuse_mod.apply_corrections(out, corrections)
    if smooth_window is not None:
        out = [fuse_mod.smooth(t, smooth_window) for t in out]
    return [fuse_mod.downsample(t, native_fps, output_fps) for t in out]


# --- artifact I/O -------------------------------------------------------------


def save_plane(path, plane: PlaneModel, inliers: np.ndarray) -> None:
    doc = {
        "coeffs": [float(v) for v in plane.coeffs],
        "rigid_to_z0": [[float(v) for v in row] for row in plane.rigid_to_z0],
        "inlier_count": int(np.count_nonzero(inliers)),
        "point_count": int(len(inliers)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plane(path) -> PlaneModel:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path} (run the fit-plane stage first)")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    return PlaneModel(np.array(doc["coeffs"], dtype=float))


def save_alignment(path, alignment: TimeAlignment) -> None:
    doc = {
        "reference": alignment.reference_camera_id,
        "offsets": dict(alignment.offsets),
        "fps": alignment.fps,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_alignment(path) -> TimeAlignment:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path} (run the sync stage first)")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    return TimeAlignment(
        reference_camera_id=doc["reference"],
        offsets={k: int(v) for k, v in doc["offsets"].items()},
        fps=float(doc["fps"]),
    )


# --- statistics ----------------------------------------------------------------


@dataclass
class SessionStats:
    pedestrian_count: int
    summed_duration_s: float
    span_s: float
    label_freq_hz: float
    anomaly_counts: dict[str, int]
    verified_count: int
    correction_count: int
    auto_fraction_strict: float | None
    auto_fraction_partial: float | None

    def to_dict(self) -> dict:
        return {
            "pedestrian_count": self.pedestrian_count,
            "summed_duration_s": self.summed_duration_s,
            "span_s": self.span_s,
            "label_freq_hz": self.label_freq_hz,
            "anomaly_counts": self.anomaly_counts,
            "verified_count": self.verified_count,
            "correction_count": self.correction_count,
            "auto_fraction_strict": self.auto_fraction_strict,
            "auto_fraction_partial": self.auto_fraction_partial,
        }


def compute_stats(
    trajectories: list[Trajectory3D],
    fps: float,
    corrections: list[Correction] | None = None,
    base_trajectories: list[Trajectory3D] | None = None,
) -> SessionStats:
    """Summarize a trajectory set.

    Frame numbers may be strided (downsampled output keeps native
    numbering), so durations use the inferred frame step: a trajectory of
    n samples lasts n/fps seconds regardless of stride. The two
    auto-label fractions answer two different questions: the strict one
    counts pedestrians untouched by any editing correction, the partial
    one counts pedestrians that still carry at least some automatically
    produced samples.
    """
    if not trajectories:
        return SessionStats(0, 0.0, 0.0, fps, {}, 0, len(corrections or []), None, None)
    steps = []
    for t in trajectories:
        if len(t.frames) >= 2:
            steps.extend(np.diff(t.frames).tolist())
    step = min(steps) if steps else 1
    summed = sum(len(t.frames) for t in trajectories) / fps
    lo = min(t.frame_start for t in trajectories)
    hi = max(t.frame_end for t in trajectories)
    span = (hi - lo + step) / (fps * step)
    anomaly_counts: dict[str, int] = {}
    for t in trajectories:
        for a in t.flags:
            anomaly_counts[a.kind] = anomaly_counts.get(a.kind, 0) + 1
    verified = sum(1 for t in trajectories if t.verified)

    auto_strict = None
    auto_partial = None
    if corrections is not None and base_trajectories is not None:
        touched: set = set()
        fuse_mod.apply_corrections(base_trajectories, corrections, touched=touched)
        n = len(trajectories)
        untouched = sum(1 for t in trajectories if t.pedestrian_id not in touched)
        auto_strict = untouched / n if n else None
        auto_kinds = {fuse_mod.SEGMENT_PAIR, fuse_mod.SEGMENT_SINGLE, fuse_mod.SEGMENT_CART}
        partial = sum(
            1 for t in trajectories if any(s.kind in auto_kinds for s in t.segments)
        )
        auto_partial = partial / n if n else None

    return SessionStats(
        pedestrian_count=len(trajectories),
        summed_duration_s=summed,
        span_s=span,
        label_freq_hz=fps,
        anomaly_counts=anomaly_counts,
        verified_count=verified,
        correction_count=len(corrections or []),
        auto_fraction_strict=auto_strict,
        auto_fraction_partial=auto_partial,
    )


# --- review session state ----------------------------------------------------------


class ReviewSession:
    """Single-writer mutable state behind the review service.

    Readers always see a complete trajectory list (updates swap the list
    reference after a pure-functional rebuild); corrections and re-fusion
    are serialized through one lock, and a correction arriving while a
    re-fusion runs is rejected rather than queued.
    """

    def __init__(self, manifest: SessionManifest, params: FuseParams | None = None):
        self.manifest = manifest
        self.params = params or FuseParams()
        self.root = manifest.root
        self.base = ingest.load_fused(os.path.join(self.root, FUSED_FILE))
        self.corrections: list[Correction] = []
        corrections_path = os.path.join(self.root, CORRECTIONS_FILE)
        if os.path.isfile(corrections_path):
            self.corrections = ingest.load_corrections(corrections_path)
        self.trajectories = fuse_mod.apply_corrections(self.base.trajectories, self.corrections)
        self.dirty = False
        self._write_lock = threading.Lock()
        self.refusing = False

    @property
    def fps(self) -> float:
        return self.base.fps

    def frame_range(self) -> tuple[int, int]:
        if not self.trajectories:
            return (0, 0)
        return (
            min(t.frame_start for t in self.trajectories),
            max(t.frame_end for t in self.trajectories),
        )

    def stats(self) -> SessionStats:
        return compute_stats(
            self.trajectories,
            self.fps,
            corrections=self.corrections,
            base_trajectories=self.base.trajectories,
        )

    def apply(self, correction: Correction) -> int:
        """Apply one correction; returns its index in the log."""
        if self.refusing:
            raise RefuseInProgress("a re-fusion is in progress; retry shortly")
        with self._write_lock:
            if self.refusing:
                raise RefuseInProgress("a re-fusion is in progress; retry shortly")
            updated = fuse_mod.apply_corrections(self.trajectories, [correction])
            self.corrections.append(correction)
            ingest.save_corrections(os.path.join(self.root, CORRECTIONS_FILE), self.corrections)
            self.trajectories = updated
            self.dirty = True
            return len(self.corrections) - 1

    def refuse(self) -> int:
        """Re-run fusion from the session inputs, then replay the log."""
        with self._write_lock:
            self.refusing = True
            try:
                inputs = load_inputs(self.manifest)
                plane = load_plane(os.path.join(self.root, PLANE_FILE))
                alignment = load_alignment(os.path.join(self.root, ALIGNMENT_FILE))
                fused = stage_fuse(inputs, plane, alignment, self.params)
                ingest.save_fused(
                    os.path.join(self.root, FUSED_FILE),
                    fused,
                    self.manifest.native_fps,
                    self.manifest.session_id,
                )
                self.base = ingest.TrajectoryFile(
                    session_id=self.manifest.session_id,
                    fps=self.manifest.native_fps,
                    trajectories=fused,
                )
                self.trajectories = fuse_mod.apply_corrections(fused, self.corrections)
                self.dirty = False
            finally:
                self.refusing = False
        return len(self.trajectories)

    def export_csv(self, output_fps: float | None = None) -> str:
        fps = output_fps if output_fps is not None else self.manifest.output_fps
        exported = [
            fuse_mod.downsample(t, self.fps, fps) for t in self.trajectories
        ]
        return ingest.trajectories_csv(exported, fps, self.manifest.session_id)
