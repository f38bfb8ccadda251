"""Frame-level time alignment of multi-camera recordings.

Each camera records a shared sync event (a light switched on in view of
all cameras); the per-frame mean luminance jumps at that instant. Finding
the jump in every stream and differencing the found frames yields integer
frame offsets onto a common timeline. Sub-frame alignment is not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import AmbiguousEvent, MissingCamera, NoEventFound


@dataclass(frozen=True, eq=False)
class LuminanceSeries:
    """Per-frame mean luminance of one camera stream (arbitrary units)."""

    camera_id: str
    frames: np.ndarray
    values: np.ndarray
    fps: float

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if frames.shape != values.shape or frames.ndim != 1:
            raise ValueError("frames and values must be 1D arrays of equal length")
        if len(frames) >= 2 and not np.all(np.diff(frames) > 0):
            raise ValueError(f"camera {self.camera_id!r}: frame indices must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"camera {self.camera_id!r}: non-finite luminance values")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        frames.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class TimeAlignment:
    """Integer frame offsets of every camera relative to a reference camera.

    Global frame g corresponds to local frame g + offsets[camera]; the
    reference camera's offset is 0 and all cameras share one frame rate.
    """

    reference_camera_id: str
    offsets: Mapping[str, int]
    fps: float

    def __post_init__(self):
        if self.reference_camera_id not in self.offsets:
            raise MissingCamera(f"reference camera {self.reference_camera_id!r} has no offset")
        if self.offsets[self.reference_camera_id] != 0:
            raise ValueError("reference camera offset must be 0")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "offsets", dict(self.offsets))

    def local_frame(self, camera_id: str, global_frame: int) -> int:
        if camera_id not in self.offsets:
            raise MissingCamera(f"camera {camera_id!r} is not covered by the alignment")
        return int(global_frame) + self.offsets[camera_id]

    def global_frame(self, camera_id: str, local_frame: int) -> int:
        if camera_id not in self.offsets:
            raise MissingCamera(f"camera {camera_id!r} is not covered by the alignment")
        return int(local_frame) - self.offsets[camera_id]


def _centered_mean(values: np.ndarray, radius: int) -> np.ndarray:
    # Symmetric moving average; the radius shrinks near the ends so the
    # window always stays centered.
    if radius <= 0:
        return values.astype(float)
    n = len(values)
    out = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    for i in range(n):
        r = min(radius, i, n - 1 - i)
        out[i] = (csum[i + r + 1] - csum[i - r]) / (2 * r + 1)
    return out


def _runs(indices: np.ndarray) -> list[np.ndarray]:
    if len(indices) == 0:
        return []
    cuts = np.flatnonzero(np.diff(indices) > 1) + 1
    return np.split(indices, cuts)


def detect_sync_event(series: LuminanceSeries, smooth_window: int = 3, mad_k: float = 8.0) -> int:
    """Locate the luminance step and return the frame index where it lands.

    The series is smoothed with a centered moving average of radius
    ``smooth_window`` and its first differences are thresholded at
    ``mad_k`` times their median absolute deviation. Consecutive passing
    differences belong to one event (smoothing smears a step across the
    window); within the winning event the raw first difference pinpoints
    the frame. Raises NoEventFound when nothing passes the threshold and
    AmbiguousEvent when a second, separate event comes within 5% of the
    strongest one.
    """
    v = series.values
    if len(v) < 2 * smooth_window + 2:
        raise ValueError(
            f"series of {len(v)} samples too short for smooth_window={smooth_window}"
        )
    smoothed = _centered_mean(v, smooth_window)
    d = np.diff(smoothed)
    mad = float(np.median(np.abs(d - np.median(d))))
    passing = np.flatnonzero((d > 0.0) & (d > mad_k * mad))
    if len(passing) == 0:
        raise NoEventFound(f"camera {series.camera_id!r}: no luminance step above threshold")
    events = _runs(passing)
    magnitudes = np.array([float(d[run].max()) for run in events])
    order = np.argsort(magnitudes)[::-1]
    if len(events) >= 2 and magnitudes[order[1]] >= 0.95 * magnitudes[order[0]]:
        raise AmbiguousEvent(
            f"camera {series.camera_id!r}: two steps within 5% of each other "
            f"({magnitudes[order[0]]:.3g} vs {magnitudes[order[1]]:.3g})"
        )
    run = events[int(order[0])]
    raw = np.diff(v)
    k = int(run[int(np.argmax(raw[run]))])
    return int(series.frames[k + 1])


def align(events: Mapping[str, int], reference: str, fps: float) -> TimeAlignment:
    """Turn per-camera sync-event frames into a TimeAlignment.

    offsets[c] = events[c] - events[reference].
    """
    if reference not in events:
        raise MissingCamera(f"reference camera {reference!r} has no detected event")
    ref = int(events[reference])
    offsets = {cam: int(frame) - ref for cam, frame in events.items()}
    return TimeAlignment(reference_camera_id=reference, offsets=offsets, fps=fps)
