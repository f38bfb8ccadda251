"""Request/response models of the review service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel


class SegmentOut(BaseModel):
    start: int
    end: int
    kind: str
    cameras: list[str]
    mean_reproj_px: float


class AnomalyOut(BaseModel):
    kind: str
    start: int
    end: int
    magnitude: float


class TrajectoryOut(BaseModel):
    id: str
    verified: bool
    samples: list[tuple[int, float, float]]
    segments: list[SegmentOut]
    flags: list[AnomalyOut]


class TrajectoryWindowOut(BaseModel):
    frame_from: int
    frame_to: int
    trajectories: list[TrajectoryOut]


class AnomalyListItem(BaseModel):
    pedestrian_id: str
    kind: str
    start: int
    end: int
    magnitude: float


class StatsOut(BaseModel):
    pedestrian_count: int
    summed_duration_s: float
    span_s: float
    label_freq_hz: float
    anomaly_counts: dict[str, int]
    verified_count: int
    correction_count: int
    auto_fraction_strict: Optional[float] = None
    auto_fraction_partial: Optional[float] = None


class SessionOut(BaseModel):
    session_id: str
    fps: float
    frame_min: int
    frame_max: int
    cameras: list[str]
    stats: StatsOut


class CorrectionIn(BaseModel):
    kind: Literal["merge", "split", "relabel", "delete", "mark_verified"]
    a: Optional[str] = None
    b: Optional[str] = None
    id: Optional[str] = None
    frame: Optional[int] = None
    old: Optional[str] = None
    new: Optional[str] = None
    start: Optional[int] = None
    end: Optional[int] = None
    author: str = ""
    timestamp: str = ""


class CorrectionOut(BaseModel):
    status: str
    correction_index: int
    trajectory_count: int


class RefuseOut(BaseModel):
    status: str
    trajectory_count: int


class ExportOut(BaseModel):
    fps: float
    csv: str
