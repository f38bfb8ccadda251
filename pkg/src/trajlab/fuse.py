"""Fusing per-camera 2D tracks into metric trajectories on the ground plane.

The stages, in pipeline order: cross-camera association by triangulation
cost, per-group fusion (best camera pair per visibility segment, single
view as fallback), gap interpolation, optional smoothing, downsampling,
anomaly flagging for human review, and replayable application of human
corrections.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import geom
from .errors import (
    DataError,
    DuplicateId,
    EmptyGroup,
    EvenWindow,
    FrameOutOfRange,
    NonIntegerRatio,
    OverlappingMerge,
    ParseError,
    UnknownId,
)
from .geom import CameraModel, PlaneModel
from .sync import TimeAlignment

logger = logging.getLogger(__name__)

# Consecutive-sample speeds above this are a data error for hand-built
# trajectories; machine output is constructed unchecked so the review loop
# can flag and fix it instead of crashing.
HARD_SPEED_CAP_MPS = 12.0

# Cost assigned to camera-pair track combinations that never overlap or
# could not be scored; large enough never to survive the accept threshold.
UNMATCHABLE_COST = 1e9

SEGMENT_PAIR = "pair"
SEGMENT_SINGLE = "single"
SEGMENT_INTERP = "interp"
SEGMENT_IMPORTED = "imported"
SEGMENT_CART = "cart"
SEGMENT_KINDS = {SEGMENT_PAIR, SEGMENT_SINGLE, SEGMENT_INTERP, SEGMENT_IMPORTED, SEGMENT_CART}

ANOMALY_SPEED_SPIKE = "speed_spike"
ANOMALY_GAP = "gap"
ANOMALY_SHORT_TRACK = "short_track"
ANOMALY_HIGH_REPROJ = "high_reproj"
ANOMALY_DEGENERATE_PAIR = "degenerate_pair"
ANOMALY_KINDS = {
    ANOMALY_SPEED_SPIKE,
    ANOMALY_GAP,
    ANOMALY_SHORT_TRACK,
    ANOMALY_HIGH_REPROJ,
    ANOMALY_DEGENERATE_PAIR,
}
# Anomaly kinds produced upstream of flag_anomalies and carried through it.
_PROPAGATED_KINDS = {ANOMALY_GAP, ANOMALY_DEGENERATE_PAIR}

CORRECTION_KINDS = {"merge", "split", "relabel", "delete", "mark_verified"}


@dataclass(frozen=True)
class Segment:
    """Provenance of a contiguous frame range of a trajectory."""

    frame_start: int
    frame_end: int
    kind: str
    cameras: tuple[str, ...]
    mean_reproj_px: float

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.frame_end < self.frame_start:
            raise ValueError("segment frame range is inverted")
        object.__setattr__(self, "cameras", tuple(self.cameras))


@dataclass(frozen=True)
class Anomaly:
    """A machine-flagged candidate for human review."""

    kind: str
    frame_start: int
    frame_end: int
    magnitude: float

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if self.frame_end < self.frame_start:
            raise ValueError("anomaly frame range is inverted")


def _sorted_segments(segments: Iterable[Segment]) -> list[Segment]:
    return sorted(segments, key=lambda s: (s.frame_start, s.frame_end, s.kind, s.cameras))


def _sorted_flags(flags: Iterable[Anomaly]) -> list[Anomaly]:
    return sorted(flags, key=lambda a: (a.frame_start, a.frame_end, a.kind, a.magnitude))


@dataclass(eq=False)
class Trajectory3D:
    """One fused pedestrian: per-frame metric positions on z=0.

    ``frames`` are strictly increasing global frame indices; ``xy`` holds
    the matching (N,2) positions in meters. ``segments`` records where
    every sample came from, ``flags`` holds review candidates, and
    ``verified`` is flipped by human sign-off.

    Hand-built trajectories are speed-checked at ``HARD_SPEED_CAP_MPS``
    (requires ``fps``); the fusion pipeline passes
    ``enforce_speed_cap=False`` because its raw output may legitimately
    contain the very errors the review loop exists to fix.
    """

    pedestrian_id: str
    frames: np.ndarray
    xy: np.ndarray
    segments: list[Segment] = field(default_factory=list)
    flags: list[Anomaly] = field(default_factory=list)
    verified: bool = False
    enforce_speed_cap: bool = True
    fps: float | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=int).reshape(-1)
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if len(frames) != len(xy):
            raise ValueError("frames and xy must have equal length")
        if len(frames) == 0:
            raise ValueError(f"trajectory {self.pedestrian_id!r} has no samples")
        if len(frames) >= 2 and not np.all(np.diff(frames) > 0):
            raise ValueError(f"trajectory {self.pedestrian_id!r}: frames must be strictly increasing")
        if not np.all(np.isfinite(xy)):
            raise ValueError(f"trajectory {self.pedestrian_id!r}: non-finite coordinates")
        frames.flags.writeable = False
        xy.flags.writeable = False
        self.frames = frames
        self.xy = xy
        self.segments = _sorted_segments(self.segments)
        self.flags = _sorted_flags(self.flags)
        lo, hi = int(frames[0]), int(frames[-1])
        for seg in self.segments:
            if seg.frame_start < lo or seg.frame_end > hi:
                raise ValueError(
                    f"trajectory {self.pedestrian_id!r}: segment [{seg.frame_start},{seg.frame_end}] "
                    f"outside sample span [{lo},{hi}]"
                )
        for flag in self.flags:
            if flag.frame_start < lo or flag.frame_end > hi:
                raise ValueError(
                    f"trajectory {self.pedestrian_id!r}: anomaly [{flag.frame_start},{flag.frame_end}] "
                    f"outside sample span [{lo},{hi}]"
                )
        if self.segments:
            covered = np.zeros(len(frames), dtype=bool)
            for seg in self.segments:
                covered |= (frames >= seg.frame_start) & (frames <= seg.frame_end)
            if not covered.all():
                missing = int(frames[~covered][0])
                raise ValueError(
                    f"trajectory {self.pedestrian_id!r}: no provenance for frame {missing}"
                )
        if self.enforce_speed_cap and len(frames) >= 2:
            if self.fps is None:
                raise ValueError("speed-cap enforcement requires fps")
            v = self.speeds(self.fps)
            if np.any(v > HARD_SPEED_CAP_MPS):
                worst = float(v.max())
                raise DataError(
                    f"trajectory {self.pedestrian_id!r}: speed {worst:.1f} m/s exceeds hard cap "
                    f"{HARD_SPEED_CAP_MPS} m/s"
                )

    def speeds(self, fps: float) -> np.ndarray:
        """Finite-difference speeds between consecutive samples, m/s."""
        if len(self.frames) < 2:
            return np.zeros(0)
        dt = np.diff(self.frames) / fps
        dist = np.linalg.norm(np.diff(self.xy, axis=0), axis=1)
        return dist / dt

    def samples(self) -> list[tuple[int, float, float]]:
        return [(int(f), float(x), float(y)) for f, (x, y) in zip(self.frames, self.xy)]

    @property
    def frame_start(self) -> int:
        return int(self.frames[0])

    @property
    def frame_end(self) -> int:
        return int(self.frames[-1])


def remake(traj: Trajectory3D, **kw) -> Trajectory3D:
    args = dict(
        pedestrian_id=traj.pedestrian_id,
        frames=traj.frames,
        xy=traj.xy,
        segments=list(traj.segments),
        flags=list(traj.flags),
        verified=traj.verified,
        enforce_speed_cap=False,
    )
    args.update(kw)
    return Trajectory3D(**args)


# --- association ----------------------------------------------------------------


@dataclass
class MatchGroup:
    """Tracks believed to show one pedestrian, keyed by (camera_id, Track2D)."""

    members: list[tuple[str, object]]
    conflict_dropped: bool = False


def _global_frames(track, alignment: TimeAlignment) -> np.ndarray:
    return track.frames - alignment.offsets[track.camera_id]


def _pair_cost(
    track_a,
    track_b,
    cam_a: CameraModel,
    cam_b: CameraModel,
    plane: PlaneModel,
    alignment: TimeAlignment,
    min_overlap_frames: int,
) -> float:
    ga = _global_frames(track_a, alignment)
    gb = _global_frames(track_b, alignment)
    common, ia, ib = np.intersect1d(ga, gb, assume_unique=True, return_indices=True)
    if len(common) < min_overlap_frames:
        return UNMATCHABLE_COST
    oa = track_a.points[ia]
    ob = track_b.points[ib]
    X, _, ok = geom.triangulate_batch(cam_a, oa, cam_b, ob, plane)
    if not ok.all():
        return UNMATCHABLE_COST
    pa, va = geom.project_batch(cam_a, X)
    pb, vb = geom.project_batch(cam_b, X)
    if not (va.all() and vb.all()):
        return UNMATCHABLE_COST
    err = 0.5 * (
        np.linalg.norm(pa - oa, axis=1) + np.linalg.norm(pb - ob, axis=1)
    )
    return float(err.mean())


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, k):
        self.parent.setdefault(k, k)
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller key wins so grouping is order-independent
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


def associate(
    tracksets: Mapping[str, Sequence],
    cams: Mapping[str, CameraModel],
    plane: PlaneModel,
    alignment: TimeAlignment,
    max_mean_reproj_px: float = 15.0,
    min_overlap_frames: int = 30,
    workers: int = 1,
) -> list[MatchGroup]:
    """Group 2D tracks across cameras.

    Every temporally overlapping track pair between two cameras is scored
    with the mean reprojection error of its plane-constrained
    triangulations over the overlap; each camera pair then gets an optimal
    one-to-one assignment minimizing total error, matches above
    ``max_mean_reproj_px`` are discarded, and surviving matches are merged
    transitively. A merged group that would contain two tracks from one
    camera is inconsistent: its matches are dropped and the members fall
    back to flagged singletons. Unmatched tracks form singleton groups.
    """
    cam_ids = sorted(tracksets)
    keyed = {
        cid: sorted(tracksets[cid], key=lambda t: t.track_id) for cid in cam_ids
    }
    pair_jobs = []
    for cid_a, cid_b in itertools.combinations(cam_ids, 2):
        ta, tb = keyed[cid_a], keyed[cid_b]
        if ta and tb:
            pair_jobs.append((cid_a, cid_b, ta, tb))

    def score_pair(job):
        cid_a, cid_b, ta, tb = job
        cost = np.full((len(ta), len(tb)), UNMATCHABLE_COST)
        for i, a in enumerate(ta):
            for j, b in enumerate(tb):
                cost[i, j] = _pair_cost(
                    a, b, cams[cid_a], cams[cid_b], plane, alignment, min_overlap_frames
                )
        return cost

    if workers > 1 and len(pair_jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            costs = list(pool.map(score_pair, pair_jobs))
    else:
        costs = [score_pair(job) for job in pair_jobs]

    edges = []
    for (cid_a, cid_b, ta, tb), cost in zip(pair_jobs, costs):
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if cost[i, j] <= max_mean_reproj_px:
                edges.append(((cid_a, ta[i].track_id), (cid_b, tb[j].track_id)))

    uf = _UnionFind()
    track_by_key = {}
    for cid in cam_ids:
        for t in keyed[cid]:
            key = (cid, t.track_id)
            track_by_key[key] = t
            uf.find(key)
    for ka, kb in edges:
        uf.union(ka, kb)

    clusters: dict[tuple, list[tuple]] = {}
    for key in sorted(track_by_key):
        clusters.setdefault(uf.find(key), []).append(key)

    groups = []
    for root in sorted(clusters):
        keys = clusters[root]
        per_cam = [k[0] for k in keys]
        if len(set(per_cam)) < len(per_cam):
            logger.warning(
                "association conflict: group %s holds multiple tracks from one camera; "
                "dropping its matches",
                keys,
            )
            for key in keys:
                groups.append(
                    MatchGroup(members=[(key[0], track_by_key[key])], conflict_dropped=True)
                )
        else:
            groups.append(MatchGroup(members=[(k[0], track_by_key[k]) for k in keys]))

    def group_sort_key(g: MatchGroup):
        starts = [int(_global_frames(t, alignment)[0]) for _, t in g.members]
        return (min(starts), tuple((cid, t.track_id) for cid, t in g.members))

    groups.sort(key=group_sort_key)
    return groups


# --- per-group fusion -------------------------------------------------------------


def _segment_runs(frame_list: np.ndarray, visibility: list[frozenset]) -> list[tuple[int, int]]:
    # maximal runs of union frames with identical camera visibility
    runs = []
    start = 0
    for i in range(1, len(frame_list)):
        if visibility[i] != visibility[start]:
            runs.append((start, i - 1))
            start = i
    runs.append((start, len(frame_list) - 1))
    return runs


def fuse_group(
    group,
    cams: Mapping[str, CameraModel],
    plane: PlaneModel,
    alignment: TimeAlignment,
    pedestrian_id: str = "p0",
) -> Trajectory3D:
    """Fuse one matched group into a metric trajectory on z=0.

    The group's union timeline splits into segments of constant camera
    visibility. In a segment seen by two or more cameras, every available
    well-conditioned pair triangulates the whole segment and the pair with
    the lowest mean reprojection error wins (per segment, not per frame,
    to avoid switching discontinuities). Single-camera segments fall back
    to ray-plane backprojection, flagged as single-view provenance. Every
    3D estimate is orthogonally projected onto the plane and mapped into
    the z=0 frame.
    """
    members = group.members if isinstance(group, MatchGroup) else list(group)
    if not members:
        raise EmptyGroup("cannot fuse an empty track group")
    conflict = isinstance(group, MatchGroup) and group.conflict_dropped

    per_cam: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for cid, track in sorted(members, key=lambda m: (m[0], m[1].track_id)):
        gf = _global_frames(track, alignment)
        per_cam[cid] = (gf, track.points)

    union = sorted(set().union(*[set(gf.tolist()) for gf, _ in per_cam.values()]))
    union = np.asarray(union, dtype=int)
    obs_at: dict[str, dict[int, np.ndarray]] = {
        cid: {int(f): pt for f, pt in zip(gf, pts)} for cid, (gf, pts) in per_cam.items()
    }
    visibility = [
        frozenset(cid for cid in per_cam if int(f) in obs_at[cid]) for f in union
    ]

    out_frames: list[int] = []
    out_xy: list[np.ndarray] = []
    segments: list[Segment] = []
    flags: list[Anomaly] = []

    for lo, hi in _segment_runs(union, visibility):
        seg_frames = union[lo : hi + 1]
        seg_cams = sorted(visibility[lo])
        obs = {
            cid: np.array([obs_at[cid][int(f)] for f in seg_frames]) for cid in seg_cams
        }
        chosen = None
        if len(seg_cams) >= 2:
            best = None
            for ca, cb in itertools.combinations(seg_cams, 2):
                X, ratio, ok = geom.triangulate_batch(cams[ca], obs[ca], cams[cb], obs[cb], plane)
                if not ok.all() or np.any(ratio >= geom.DEGENERATE_SV_RATIO):
                    continue
                pa, va = geom.project_batch(cams[ca], X)
                pb, vb = geom.project_batch(cams[cb], X)
                if not (va.all() and vb.all()):
                    continue
                err = float(
                    np.mean(
                        0.5 * (np.linalg.norm(pa - obs[ca], axis=1) + np.linalg.norm(pb - obs[cb], axis=1))
                    )
                )
                if best is None or err < best[0]:
                    best = (err, (ca, cb), X)
            if best is not None:
                err, (ca, cb), X = best
                ground = geom.project_onto_plane(plane, X)
                chosen = (ground, Segment(int(seg_frames[0]), int(seg_frames[-1]), SEGMENT_PAIR, (ca, cb), err))
            else:
                flags.append(
                    Anomaly(
                        ANOMALY_DEGENERATE_PAIR,
                        int(seg_frames[0]),
                        int(seg_frames[-1]),
                        float(len(seg_cams)),
                    )
                )
        if chosen is None:
            cid = seg_cams[0]
            pts, valid = geom.backproject_batch(cams[cid], obs[cid], plane, 0.0)
            keep = valid
            if not keep.any():
                continue
            ground = geom.project_onto_plane(plane, pts[keep])
            seg_frames = seg_frames[keep]
            chosen = (ground, Segment(int(seg_frames[0]), int(seg_frames[-1]), SEGMENT_SINGLE, (cid,), 0.0))
        ground, seg = chosen
        mapped = geom.to_ground_frame_batch(plane, ground)
        out_frames.extend(int(f) for f in seg_frames)
        out_xy.extend(mapped[:, :2])
        segments.append(seg)

    if not out_frames:
        raise EmptyGroup(f"group for {pedestrian_id!r} produced no usable samples")
    if conflict:
        flags.append(
            Anomaly(ANOMALY_DEGENERATE_PAIR, out_frames[0], out_frames[-1], float(len(members)))
        )
    return Trajectory3D(
        pedestrian_id=pedestrian_id,
        frames=np.array(out_frames, dtype=int),
        xy=np.array(out_xy, dtype=float),
        segments=segments,
        flags=flags,
        enforce_speed_cap=False,
    )


# --- trajectory post-processing -----------------------------------------------------


def _slice_meta(traj: Trajectory3D, lo: int, hi: int) -> tuple[list[Segment], list[Anomaly]]:
    segs = []
    for s in traj.segments:
        a, b = max(s.frame_start, lo), min(s.frame_end, hi)
        if a <= b:
            segs.append(replace(s, frame_start=a, frame_end=b))
    flags = []
    for f in traj.flags:
        a, b = max(f.frame_start, lo), min(f.frame_end, hi)
        if a <= b:
            flags.append(replace(f, frame_start=a, frame_end=b))
    return segs, flags


def _slice_traj(traj: Trajectory3D, mask: np.ndarray, new_id: str) -> Trajectory3D:
    frames = traj.frames[mask]
    lo, hi = int(frames[0]), int(frames[-1])
    segs, flags = _slice_meta(traj, lo, hi)
    return Trajectory3D(
        pedestrian_id=new_id,
        frames=frames,
        xy=traj.xy[mask],
        segments=segs,
        flags=flags,
        verified=traj.verified,
        enforce_speed_cap=False,
    )


def interpolate_gaps(traj: Trajectory3D, max_gap_s: float, fps: float) -> list[Trajectory3D]:
    """Fill short sample gaps linearly; split the trajectory at long ones.

    A gap of k missing frames is filled when k/fps <= max_gap_s; filled
    samples carry interpolation provenance and a gap anomaly. Longer gaps
    cut the trajectory, the later part getting a "_b" suffixed id.
    """
    cut_points = []
    for i in range(len(traj.frames) - 1):
        missing = int(traj.frames[i + 1] - traj.frames[i]) - 1
        if missing > 0 and missing / fps > max_gap_s:
            cut_points.append(i + 1)
    pieces = []
    prev = 0
    for cut in cut_points:
        pieces.append((prev, cut))
        prev = cut
    pieces.append((prev, len(traj.frames)))

    out = []
    pid = traj.pedestrian_id
    for idx, (a, b) in enumerate(pieces):
        mask = np.zeros(len(traj.frames), dtype=bool)
        mask[a:b] = True
        part = _slice_traj(traj, mask, pid)
        if idx < len(pieces) - 1:
            gap_lo = int(traj.frames[b - 1])
            gap_hi = int(traj.frames[b])
            gap_mag = (gap_hi - gap_lo - 1) / fps
            part = remake(
                part,
                flags=list(part.flags) + [Anomaly(ANOMALY_GAP, part.frame_end, part.frame_end, gap_mag)],
            )
        if idx > 0:
            prev_hi = int(traj.frames[pieces[idx - 1][1] - 1])
            gap_mag = (part.frame_start - prev_hi - 1) / fps
            part = remake(
                part,
                flags=list(part.flags) + [Anomaly(ANOMALY_GAP, part.frame_start, part.frame_start, gap_mag)],
            )
        out.append(part)
        pid = pid + "_b"

    filled = []
    for part in out:
        frames = part.frames
        new_frames = [int(frames[0])]
        new_xy = [part.xy[0]]
        segs = list(part.segments)
        flags = list(part.flags)
        for i in range(len(frames) - 1):
            f0, f1 = int(frames[i]), int(frames[i + 1])
            missing = f1 - f0 - 1
            if missing > 0:
                fill = np.arange(f0 + 1, f1)
                t = (fill - f0) / (f1 - f0)
                xy = part.xy[i] + t[:, None] * (part.xy[i + 1] - part.xy[i])
                new_frames.extend(int(f) for f in fill)
                new_xy.extend(xy)
                segs.append(Segment(f0 + 1, f1 - 1, SEGMENT_INTERP, (), 0.0))
                flags.append(Anomaly(ANOMALY_GAP, f0, f1, missing / fps))
            new_frames.append(f1)
            new_xy.append(part.xy[i + 1])
        filled.append(
            Trajectory3D(
                pedestrian_id=part.pedestrian_id,
                frames=np.array(new_frames, dtype=int),
                xy=np.array(new_xy, dtype=float),
                segments=segs,
                flags=flags,
                verified=part.verified,
                enforce_speed_cap=False,
            )
        )
    return filled


def smooth(traj: Trajectory3D, window: int) -> Trajectory3D:
    """Centered moving average over samples; window must be odd.

    Near the endpoints the window shrinks symmetrically, so the filter
    stays unbiased on linear motion. window=1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"smoothing window must be odd and >= 1, got {window}")
    if window == 1:
        return remake(traj)
    half = window // 2
    n = len(traj.frames)
    out = np.empty_like(traj.xy)
    csum = np.vstack([np.zeros(2), np.cumsum(traj.xy, axis=0)])
    for i in range(n):
        r = min(half, i, n - 1 - i)
        out[i] = (csum[i + r + 1] - csum[i - r]) / (2 * r + 1)
    return remake(traj, xy=out)


def downsample(traj: Trajectory3D, native_fps: float, output_fps: float) -> Trajectory3D:
    """Keep every (native/output)-th sample starting from the first.

    The rate ratio must reduce to an integer; kept samples are
    bit-identical to the originals.
    """
    if not (native_fps > 0 and output_fps > 0):
        raise NonIntegerRatio("frame rates must be positive")
    ratio = native_fps / output_fps
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise NonIntegerRatio(
            f"native {native_fps:g} Hz is not an integer multiple of output {output_fps:g} Hz"
        )
    frames = traj.frames[::k]
    xy = traj.xy[::k]
    lo, hi = int(frames[0]), int(frames[-1])
    segs = []
    for s in traj.segments:
        a, b = max(s.frame_start, lo), min(s.frame_end, hi)
        if a <= b:
            segs.append(replace(s, frame_start=a, frame_end=b))
    flags = []
    for f in traj.flags:
        a, b = max(f.frame_start, lo), min(f.frame_end, hi)
        if a <= b:
            flags.append(replace(f, frame_start=a, frame_end=b))
    return remake(traj, frames=frames, xy=xy, segments=segs, flags=flags)


def flag_anomalies(
    traj: Trajectory3D,
    fps: float,
    v_max_mps: float = 4.0,
    min_duration_s: float = 1.0,
    reproj_warn_px: float = 10.0,
) -> list[Anomaly]:
    """Machine-side review candidates for one trajectory.

    Speed spikes above ``v_max_mps``, too-short tracks, segments with high
    mean reprojection error; gap and degenerate-pair flags recorded during
    fusion are carried through.
    """
    out = [f for f in traj.flags if f.kind in _PROPAGATED_KINDS]
    v = traj.speeds(fps)
    for i in np.flatnonzero(v > v_max_mps):
        out.append(
            Anomaly(ANOMALY_SPEED_SPIKE, int(traj.frames[i]), int(traj.frames[i + 1]), float(v[i]))
        )
    duration = (traj.frame_end - traj.frame_start) / fps
    if duration < min_duration_s:
        out.append(Anomaly(ANOMALY_SHORT_TRACK, traj.frame_start, traj.frame_end, duration))
    for seg in traj.segments:
        if seg.kind in (SEGMENT_PAIR, SEGMENT_SINGLE) and seg.mean_reproj_px > reproj_warn_px:
            out.append(
                Anomaly(ANOMALY_HIGH_REPROJ, seg.frame_start, seg.frame_end, seg.mean_reproj_px)
            )
    return _sorted_flags(out)


# --- corrections -------------------------------------------------------------------


@dataclass(frozen=True)
class Correction:
    """One human edit, replayable in order.

    Field usage by kind: merge(a, b), split(id, frame), relabel(old, new),
    delete(id, start, end), mark_verified(id).
    """

    kind: str
    a: str | None = None
    b: str | None = None
    id: str | None = None
    frame: int | None = None
    old: str | None = None
    new: str | None = None
    start: int | None = None
    end: int | None = None
    author: str = ""
    timestamp: str = ""

    def __post_init__(self):
        if self.kind not in CORRECTION_KINDS:
            raise ParseError(f"unknown correction kind {self.kind!r}")
        required = {
            "merge": ("a", "b"),
            "split": ("id", "frame"),
            "relabel": ("old", "new"),
            "delete": ("id", "start", "end"),
            "mark_verified": ("id",),
        }[self.kind]
        for name in required:
            if getattr(self, name) is None:
                raise ParseError(f"correction {self.kind!r} is missing field {name!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("a", "b", "id", "frame", "old", "new", "start", "end"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out["author"] = self.author
        out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "Correction":
        if "kind" not in d:
            raise ParseError("correction record has no 'kind'")
        known = {"kind", "a", "b", "id", "frame", "old", "new", "start", "end", "author", "timestamp"}
        unknown = set(d) - known
        if unknown:
            raise ParseError(f"correction record has unknown fields {sorted(unknown)}")
        return cls(**{k: d[k] for k in d})


def _unique_id(base: str, taken) -> str:
    pid = base
    while pid in taken:
        pid = pid + "_b"
    return pid


def _merge(a: Trajectory3D, b: Trajectory3D) -> Trajectory3D:
    if np.intersect1d(a.frames, b.frames).size > 0:
        raise OverlappingMerge(
            f"trajectories {a.pedestrian_id!r} and {b.pedestrian_id!r} share frames"
        )
    frames = np.concatenate([a.frames, b.frames])
    xy = np.concatenate([a.xy, b.xy])
    order = np.argsort(frames, kind="stable")
    return Trajectory3D(
        pedestrian_id=a.pedestrian_id,
        frames=frames[order],
        xy=xy[order],
        segments=list(a.segments) + list(b.segments),
        flags=list(a.flags) + list(b.flags),
        verified=a.verified and b.verified,
        enforce_speed_cap=False,
    )


def apply_corrections(
    trajectories: Sequence[Trajectory3D],
    corrections: Sequence[Correction],
    touched: set | None = None,
) -> list[Trajectory3D]:
    """Apply an ordered correction list; pure and replayable.

    The same input and the same list always produce the identical output.
    ``touched``, when given, collects ids affected by editing corrections
    (everything except mark_verified) for auto-vs-corrected statistics.
    """
    out: list[Trajectory3D] = list(trajectories)

    def index_of(pid: str) -> int:
        for i, t in enumerate(out):
            if t.pedestrian_id == pid:
                return i
        raise UnknownId(f"no trajectory with id {pid!r}")

    def note(*ids):
        if touched is not None:
            touched.update(ids)

    for corr in corrections:
        if corr.kind == "merge":
            ia, ib = index_of(corr.a), index_of(corr.b)
            merged = _merge(out[ia], out[ib])
            out[ia] = merged
            del out[ib]
            note(corr.a, corr.b)
        elif corr.kind == "split":
            i = index_of(corr.id)
            traj = out[i]
            cut = int(corr.frame)
            if not (traj.frame_start < cut <= traj.frame_end):
                raise FrameOutOfRange(
                    f"split frame {cut} outside ({traj.frame_start}, {traj.frame_end}] of {corr.id!r}"
                )
            first = _slice_traj(traj, traj.frames < cut, traj.pedestrian_id)
            second_id = _unique_id(
                traj.pedestrian_id + "_b", {t.pedestrian_id for t in out}
            )
            second = _slice_traj(traj, traj.frames >= cut, second_id)
            out[i] = first
            out.insert(i + 1, second)
            note(corr.id, second_id)
        elif corr.kind == "relabel":
            i = index_of(corr.old)
            if any(t.pedestrian_id == corr.new for t in out):
                raise DuplicateId(f"id {corr.new!r} already exists")
            out[i] = remake(out[i], pedestrian_id=corr.new)
            note(corr.old, corr.new)
        elif corr.kind == "delete":
            i = index_of(corr.id)
            traj = out[i]
            lo, hi = int(corr.start), int(corr.end)
            if lo > hi:
                raise FrameOutOfRange(f"delete range [{lo},{hi}] is inverted")
            inside = (traj.frames >= lo) & (traj.frames <= hi)
            if not inside.any():
                raise FrameOutOfRange(
                    f"delete range [{lo},{hi}] does not touch {corr.id!r} "
                    f"([{traj.frame_start},{traj.frame_end}])"
                )
            note(corr.id)
            keep = ~inside
            if not keep.any():
                del out[i]
                continue
            before = keep & (traj.frames < lo)
            after = keep & (traj.frames > hi)
            if before.any() and after.any():
                first = _slice_traj(traj, before, traj.pedestrian_id)
                second_id = _unique_id(
                    traj.pedestrian_id + "_b", {t.pedestrian_id for t in out}
                )
                second = _slice_traj(traj, after, second_id)
                out[i] = first
                out.insert(i + 1, second)
                note(second_id)
            else:
                out[i] = _slice_traj(traj, keep, traj.pedestrian_id)
        elif corr.kind == "mark_verified":
            i = index_of(corr.id)
            out[i] = remake(out[i], verified=True)
    return out
