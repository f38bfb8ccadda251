"""On-disk formats: parsing, validation, and writers.

Formats:
  calibration    JSON  {"cameras":[{"id","width","height","P":[12 numbers]}]}
  tracks         CSV   frame,track_id,x,y,w,h           (per camera; boxes)
  ground points  CSV   x,y,z                            (meters)
  luminance      CSV   frame,luminance                  (per camera)
  trajectories   CSV   "# fps=", "# session=" comments, frame,id,x,y rows
  cart labels    CSV   camera_id,frame,x,y,source
  fused state    JSON  full trajectories incl. provenance and flags
  corrections    JSON  ordered list of correction records
  manifest       JSON  binds a session's inputs together

All loaders reject NaN/Inf fields with a ParseError naming the offending
line; loaders are reentrant and share no mutable state.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cart import CartLabel
from .errors import ParseError
from .fuse import Anomaly, Correction, Segment, Trajectory3D
from .geom import CameraModel
from .sync import LuminanceSeries

logger = logging.getLogger(__name__)


def _require(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _float_field(raw: str, name: str, path, line_no: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"field {name!r} is not a number: {raw!r}", path, line_no) from None
    if not math.isfinite(value):
        raise ParseError(f"field {name!r} is not finite: {raw!r}", path, line_no)
    return value


def _int_field(raw: str, name: str, path, line_no: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"field {name!r} is not an integer: {raw!r}", path, line_no) from None


def _data_lines(path, expected_header: str):
    """Yield (line_no, fields) for CSV data rows, validating the header."""
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line
                if header.replace(" ", "") != expected_header:
                    raise ParseError(
                        f"expected header {expected_header!r}, got {header!r}", path, line_no
                    )
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(expected_header.split(",")):
                raise ParseError(
                    f"expected {len(expected_header.split(','))} fields, got {len(fields)}",
                    path,
                    line_no,
                )
            yield line_no, fields
        if header is None:
            raise ParseError(f"missing header {expected_header!r}", path, None)


# --- calibration -----------------------------------------------------------------


def load_calibration(path) -> list[CameraModel]:
    """Load camera models; P is validated per the CameraModel invariants."""
    _require(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    if not isinstance(doc, dict) or "cameras" not in doc or not isinstance(doc["cameras"], list):
        raise ParseError("expected an object with a 'cameras' list", path)
    cams = []
    seen = set()
    for i, entry in enumerate(doc["cameras"]):
        for key in ("id", "width", "height", "P"):
            if key not in entry:
                raise ParseError(f"camera entry {i} is missing {key!r}", path)
        if not isinstance(entry["P"], list) or len(entry["P"]) != 12:
            raise ParseError(f"camera {entry['id']!r}: P must be 12 row-major numbers", path)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in entry["P"]):
            raise ParseError(f"camera {entry['id']!r}: P has non-finite entries", path)
        if entry["id"] in seen:
            raise ParseError(f"duplicate camera id {entry['id']!r}", path)
        seen.add(entry["id"])
        cams.append(
            CameraModel(
                id=str(entry["id"]),
                P=np.array(entry["P"], dtype=float).reshape(3, 4),
                width=int(entry["width"]),
                height=int(entry["height"]),
            )
        )
    return cams


def write_calibration(path, cameras) -> None:
    doc = {
        "cameras": [
            {
                "id": cam.id,
                "width": cam.width,
                "height": cam.height,
                "P": [float(v) for v in cam.P.reshape(-1)],
            }
            for cam in cameras
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- 2D tracks --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Track2D:
    """One tracker output: per-frame representative pixel points.

    The representative point of a bounding box is its bottom center,
    approximating the foot contact point the ground-plane model needs.
    """

    camera_id: str
    track_id: int
    frames: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=int)
        points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(frames) != len(points):
            raise ValueError("frames and points must have equal length")
        if len(frames) >= 2 and not np.all(np.diff(frames) > 0):
            raise ValueError(
                f"track {self.camera_id}/{self.track_id}: frames must be strictly increasing"
            )
        if not np.all(np.isfinite(points)):
            raise ValueError(f"track {self.camera_id}/{self.track_id}: non-finite points")
        frames.flags.writeable = False
        points.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "points", points)


def load_tracks(path, camera_id: str, width: int, height: int) -> list[Track2D]:
    """Load MOT-style boxes and reduce them to bottom-center points.

    Duplicate (frame, id) rows keep the last observation with a warning;
    points must fall inside the image with a 10% margin.
    """
    _require(path)
    margin_x, margin_y = 0.1 * width, 0.1 * height
    per_track: dict[int, dict[int, tuple[float, float]]] = {}
    dupes = 0
    for line_no, f in _data_lines(path, "frame,track_id,x,y,w,h"):
        frame = _int_field(f[0], "frame", path, line_no)
        tid = _int_field(f[1], "track_id", path, line_no)
        x = _float_field(f[2], "x", path, line_no)
        y = _float_field(f[3], "y", path, line_no)
        w = _float_field(f[4], "w", path, line_no)
        h = _float_field(f[5], "h", path, line_no)
        px, py = x + w / 2.0, y + h
        if not (-margin_x <= px <= width + margin_x and -margin_y <= py <= height + margin_y):
            raise ParseError(
                f"point ({px:.1f}, {py:.1f}) outside image {width}x{height} (+10% margin)",
                path,
                line_no,
            )
        obs = per_track.setdefault(tid, {})
        if frame in obs:
            dupes += 1
        obs[frame] = (px, py)
    if dupes:
        logger.warning("%s: %d duplicate (frame, track_id) rows; last observation wins", path, dupes)
    if not per_track:
        logger.warning("%s: no track rows (empty file)", path)
        return []
    tracks = []
    for tid in sorted(per_track):
        frames = sorted(per_track[tid])
        tracks.append(
            Track2D(
                camera_id=camera_id,
                track_id=tid,
                frames=np.array(frames, dtype=int),
                points=np.array([per_track[tid][f] for f in frames], dtype=float),
            )
        )
    return tracks


def write_track_boxes(path, rows) -> None:
    """Write raw box rows (frame, track_id, x, y, w, h)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame,track_id,x,y,w,h\n")
        for frame, tid, x, y, w, h in rows:
            fh.write(f"{int(frame)},{int(tid)},{x:.6f},{y:.6f},{w:.6f},{h:.6f}\n")


# --- ground points / luminance ------------------------------------------------------


def load_ground_points(path) -> np.ndarray:
    _require(path)
    pts = []
    for line_no, f in _data_lines(path, "x,y,z"):
        pts.append(
            (
                _float_field(f[0], "x", path, line_no),
                _float_field(f[1], "y", path, line_no),
                _float_field(f[2], "z", path, line_no),
            )
        )
    return np.array(pts, dtype=float).reshape(-1, 3)


def write_ground_points(path, points: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,z\n")
        for x, y, z in np.asarray(points, dtype=float).reshape(-1, 3):
            fh.write(f"{x:.6f},{y:.6f},{z:.6f}\n")


def load_luminance(path, camera_id: str, fps: float) -> LuminanceSeries:
    _require(path)
    frames, values = [], []
    for line_no, f in _data_lines(path, "frame,luminance"):
        frames.append(_int_field(f[0], "frame", path, line_no))
        values.append(_float_field(f[1], "luminance", path, line_no))
    try:
        return LuminanceSeries(camera_id=camera_id, frames=frames, values=values, fps=fps)
    except ValueError as e:
        raise ParseError(str(e), path) from None


def write_luminance(path, series: LuminanceSeries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame,luminance\n")
        for frame, value in zip(series.frames, series.values):
            fh.write(f"{int(frame)},{value:.6f}\n")


# --- cart labels -----------------------------------------------------------------


def load_cart_labels(path, cameras: dict[str, CameraModel]) -> list[CartLabel]:
    _require(path)
    labels = []
    for line_no, f in _data_lines(path, "camera_id,frame,x,y,source"):
        cid = f[0]
        if cid not in cameras:
            raise ParseError(f"unknown camera id {cid!r}", path, line_no)
        cam = cameras[cid]
        frame = _int_field(f[1], "frame", path, line_no)
        x = _float_field(f[2], "x", path, line_no)
        y = _float_field(f[3], "y", path, line_no)
        source = f[4]
        if source not in ("manual", "tag"):
            raise ParseError(f"source must be 'manual' or 'tag', got {source!r}", path, line_no)
        if frame < 0:
            raise ParseError(f"frame must be >= 0, got {frame}", path, line_no)
        mx, my = 0.1 * cam.width, 0.1 * cam.height
        if not (-mx <= x <= cam.width + mx and -my <= y <= cam.height + my):
            raise ParseError(
                f"label ({x:.1f}, {y:.1f}) outside image {cam.width}x{cam.height} (+10% margin)",
                path,
                line_no,
            )
        labels.append(CartLabel(camera_id=cid, frame=frame, x=x, y=y, source=source))
    return labels


def write_cart_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("camera_id,frame,x,y,source\n")
        for lab in labels:
            fh.write(f"{lab.camera_id},{int(lab.frame)},{lab.x:.6f},{lab.y:.6f},{lab.source}\n")


# --- trajectory CSV -----------------------------------------------------------------


@dataclass
class TrajectoryFile:
    session_id: str
    fps: float
    trajectories: list[Trajectory3D]


def write_trajectories(path_or_buf, trajectories, fps: float, session_id: str = "") -> None:
    """Write the interchange CSV: comment headers, then frame,id,x,y rows.

    Rows are sorted by (frame, id) and coordinates carry fixed 6-decimal
    formatting, so writing the loaded file back is byte-identical.
    """
    rows = []
    for traj in trajectories:
        for frame, (x, y) in zip(traj.frames, traj.xy):
            rows.append((int(frame), traj.pedestrian_id, float(x), float(y)))
    rows.sort(key=lambda r: (r[0], r[1]))
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
    try:
        fh.write(f"# fps={fps:g}\n")
        fh.write(f"# session={session_id}\n")
        fh.write("frame,id,x,y\n")
        for frame, pid, x, y in rows:
            fh.write(f"{frame},{pid},{x:.6f},{y:.6f}\n")
    finally:
        if own:
            fh.close()


def trajectories_csv(trajectories, fps: float, session_id: str = "") -> str:
    import io

    buf = io.StringIO()
    write_trajectories(buf, trajectories, fps, session_id)
    return buf.getvalue()


def load_trajectories(path) -> TrajectoryFile:
    """Load the interchange CSV back into trajectories.

    Loaded trajectories carry a single imported-provenance segment; the
    CSV does not store per-segment provenance or flags.
    """
    _require(path)
    fps = None
    session_id = ""
    per_id: dict[str, dict[int, tuple[float, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("fps="):
                    fps = _float_field(body[4:], "fps", path, line_no)
                elif body.startswith("session="):
                    session_id = body[8:]
                continue
            if not header_seen:
                if line.replace(" ", "") != "frame,id,x,y":
                    raise ParseError(f"expected header 'frame,id,x,y', got {line!r}", path, line_no)
                header_seen = True
                continue
            f = [s.strip() for s in line.split(",")]
            if len(f) != 4:
                raise ParseError(f"expected 4 fields, got {len(f)}", path, line_no)
            frame = _int_field(f[0], "frame", path, line_no)
            pid = f[1]
            x = _float_field(f[2], "x", path, line_no)
            y = _float_field(f[3], "y", path, line_no)
            obs = per_id.setdefault(pid, {})
            if frame in obs:
                raise ParseError(f"duplicate frame {frame} for id {pid!r}", path, line_no)
            obs[frame] = (x, y)
        if not header_seen:
            raise ParseError("missing header 'frame,id,x,y'", path, None)
    if fps is None:
        raise ParseError("missing '# fps=' comment", path, None)
    trajectories = []
    for pid in sorted(per_id):
        frames = sorted(per_id[pid])
        trajectories.append(
            Trajectory3D(
                pedestrian_id=pid,
                frames=np.array(frames, dtype=int),
                xy=np.array([per_id[pid][f] for f in frames], dtype=float),
                segments=[Segment(frames[0], frames[-1], "imported", (), 0.0)],
                enforce_speed_cap=False,
            )
        )
    return TrajectoryFile(session_id=session_id, fps=fps, trajectories=trajectories)


# --- fused session state (rich JSON) ---------------------------------------------------


def _traj_to_dict(traj: Trajectory3D) -> dict:
    return {
        "id": traj.pedestrian_id,
        "verified": traj.verified,
        "samples": [[int(f), float(x), float(y)] for f, (x, y) in zip(traj.frames, traj.xy)],
        "segments": [
            {
                "start": s.frame_start,
                "end": s.frame_end,
                "kind": s.kind,
                "cameras": list(s.cameras),
                "mean_reproj_px": s.mean_reproj_px,
            }
            for s in traj.segments
        ],
        "flags": [
            {"kind": a.kind, "start": a.frame_start, "end": a.frame_end, "magnitude": a.magnitude}
            for a in traj.flags
        ],
    }


def _traj_from_dict(d: dict) -> Trajectory3D:
    samples = d["samples"]
    return Trajectory3D(
        pedestrian_id=d["id"],
        frames=np.array([s[0] for s in samples], dtype=int),
        xy=np.array([[s[1], s[2]] for s in samples], dtype=float),
        segments=[
            Segment(s["start"], s["end"], s["kind"], tuple(s["cameras"]), s["mean_reproj_px"])
            for s in d["segments"]
        ],
        flags=[Anomaly(a["kind"], a["start"], a["end"], a["magnitude"]) for a in d["flags"]],
        verified=d["verified"],
        enforce_speed_cap=False,
    )


def fused_state_json(trajectories, fps: float, session_id: str) -> str:
    doc = {
        "session": session_id,
        "fps": fps,
        "trajectories": [_traj_to_dict(t) for t in trajectories],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_fused(path, trajectories, fps: float, session_id: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(fused_state_json(trajectories, fps, session_id))


def load_fused(path) -> TrajectoryFile:
    _require(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    try:
        return TrajectoryFile(
            session_id=doc["session"],
            fps=float(doc["fps"]),
            trajectories=[_traj_from_dict(d) for d in doc["trajectories"]],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid fused state: {e}", path) from None


# --- corrections ------------------------------------------------------------------


def load_corrections(path) -> list[Correction]:
    _require(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    if not isinstance(doc, list):
        raise ParseError("corrections file must hold a JSON list", path)
    return [Correction.from_dict(d) for d in doc]


def save_corrections(path, corrections) -> None:
    doc = [c.to_dict() for c in corrections]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- session manifest ----------------------------------------------------------------


@dataclass
class SessionManifest:
    """Binds one recording session's inputs together.

    Paths are stored as given in the file and resolved against the
    manifest's directory.
    """

    session_id: str
    calibration: str
    tracks: dict[str, str]
    ground_points: str
    native_fps: float
    output_fps: float
    luminance: dict[str, str] = field(default_factory=dict)
    cart_labels: str | None = None
    cart_tag_height_m: float | None = None
    seed: int = 0
    root: str = "."

    def resolve(self, rel: str) -> str:
        return os.path.normpath(os.path.join(self.root, rel))

    @property
    def camera_ids(self) -> list[str]:
        return sorted(self.tracks)


def load_manifest(path) -> SessionManifest:
    """Load and validate a session manifest.

    Checks that every referenced file exists, that native_fps >= output_fps > 0,
    and that track camera ids are a subset of the calibration's.
    """
    _require(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    for key in ("session", "calibration", "tracks", "ground_points", "native_fps", "output_fps"):
        if key not in doc:
            raise ParseError(f"manifest is missing {key!r}", path)
    manifest = SessionManifest(
        session_id=str(doc["session"]),
        calibration=doc["calibration"],
        tracks=dict(doc["tracks"]),
        ground_points=doc["ground_points"],
        native_fps=float(doc["native_fps"]),
        output_fps=float(doc["output_fps"]),
        luminance=dict(doc.get("luminance", {})),
        cart_labels=doc.get("cart_labels"),
        cart_tag_height_m=doc.get("cart_tag_height_m"),
        seed=int(doc.get("seed", 0)),
        root=os.path.dirname(os.path.abspath(path)),
    )
    if not (manifest.native_fps >= manifest.output_fps > 0):
        raise ParseError(
            f"need native_fps >= output_fps > 0, got {manifest.native_fps} and {manifest.output_fps}",
            path,
        )
    referenced = [manifest.calibration, manifest.ground_points]
    referenced += list(manifest.tracks.values()) + list(manifest.luminance.values())
    if manifest.cart_labels:
        referenced.append(manifest.cart_labels)
    for rel in referenced:
        _require(manifest.resolve(rel))
    calib_ids = {cam.id for cam in load_calibration(manifest.resolve(manifest.calibration))}
    extra = set(manifest.tracks) - calib_ids
    if extra:
        raise ParseError(f"track files reference uncalibrated cameras {sorted(extra)}", path)
    return manifest


def save_manifest(path, manifest: SessionManifest) -> None:
    doc = {
        "session": manifest.session_id,
        "calibration": manifest.calibration,
        "tracks": manifest.tracks,
        "ground_points": manifest.ground_points,
        "native_fps": manifest.native_fps,
        "output_fps": manifest.output_fps,
        "seed": manifest.seed,
    }
    if manifest.luminance:
        doc["luminance"] = manifest.luminance
    if manifest.cart_labels:
        doc["cart_labels"] = manifest.cart_labels
    if manifest.cart_tag_height_m is not None:
        doc["cart_tag_height_m"] = manifest.cart_tag_height_m
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
