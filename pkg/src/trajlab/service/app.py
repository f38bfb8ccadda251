"""HTTP review service: read endpoints for the session and its
trajectories, write endpoints for corrections and re-fusion.

Everything is JSON on localhost. Invalid corrections come back as 400
with a machine-readable error code; corrections racing a re-fusion get
409. When a built review UI is present its static assets are served at
the root path.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import RefuseInProgress, TrajlabError
from ..fuse import Correction, Trajectory3D
from ..session import ReviewSession
from .schemas import (
    AnomalyListItem,
    AnomalyOut,
    CorrectionIn,
    CorrectionOut,
    ExportOut,
    RefuseOut,
    SegmentOut,
    SessionOut,
    StatsOut,
    TrajectoryOut,
    TrajectoryWindowOut,
)


def _trajectory_out(traj: Trajectory3D, lo: int, hi: int) -> TrajectoryOut | None:
    mask = (traj.frames >= lo) & (traj.frames <= hi)
    if not mask.any():
        return None
    samples = [
        (int(f), float(x), float(y)) for f, (x, y) in zip(traj.frames[mask], traj.xy[mask])
    ]
    segments = [
        SegmentOut(
            start=s.frame_start,
            end=s.frame_end,
            kind=s.kind,
            cameras=list(s.cameras),
            mean_reproj_px=s.mean_reproj_px,
        )
        for s in traj.segments
        if s.frame_end >= lo and s.frame_start <= hi
    ]
    flags = [
        AnomalyOut(kind=a.kind, start=a.frame_start, end=a.frame_end, magnitude=a.magnitude)
        for a in traj.flags
        if a.frame_end >= lo and a.frame_start <= hi
    ]
    return TrajectoryOut(
        id=traj.pedestrian_id,
        verified=traj.verified,
        samples=samples,
        segments=segments,
        flags=flags,
    )


def create_app(state: ReviewSession, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="trajlab review service")

    @app.exception_handler(TrajlabError)
    async def trajlab_error(_, exc: TrajlabError):
        status = 409 if isinstance(exc, RefuseInProgress) else 400
        return JSONResponse(
            status_code=status, content={"detail": {"code": exc.code, "message": str(exc)}}
        )

    @app.get("/api/session", response_model=SessionOut)
    def get_session():
        lo, hi = state.frame_range()
        stats = state.stats()
        return SessionOut(
            session_id=state.manifest.session_id,
            fps=state.fps,
            frame_min=lo,
            frame_max=hi,
            cameras=sorted(state.manifest.tracks),
            stats=StatsOut(**stats.to_dict()),
        )

    @app.get("/api/trajectories", response_model=TrajectoryWindowOut)
    def get_trajectories(
        frame_from: int | None = Query(default=None, alias="from"),
        frame_to: int | None = Query(default=None, alias="to"),
    ):
        lo, hi = state.frame_range()
        if frame_from is not None:
            lo = frame_from
        if frame_to is not None:
            hi = frame_to
        snapshot = state.trajectories
        out = []
        for traj in snapshot:
            item = _trajectory_out(traj, lo, hi)
            if item is not None:
                out.append(item)
        return TrajectoryWindowOut(frame_from=lo, frame_to=hi, trajectories=out)

    @app.get("/api/anomalies", response_model=list[AnomalyListItem])
    def get_anomalies():
        snapshot = state.trajectories
        items = []
        for traj in snapshot:
            for a in traj.flags:
                items.append(
                    AnomalyListItem(
                        pedestrian_id=traj.pedestrian_id,
                        kind=a.kind,
                        start=a.frame_start,
                        end=a.frame_end,
                        magnitude=a.magnitude,
                    )
                )
        items.sort(key=lambda x: (x.start, x.pedestrian_id, x.kind))
        return items

    @app.post("/api/corrections", response_model=CorrectionOut)
    def post_correction(body: CorrectionIn):
        correction = Correction(**body.model_dump())
        index = state.apply(correction)
        return CorrectionOut(
            status="applied",
            correction_index=index,
            trajectory_count=len(state.trajectories),
        )

    @app.post("/api/refuse", response_model=RefuseOut)
    def post_refuse():
        count = state.refuse()
        return RefuseOut(status="refused", trajectory_count=count)

    @app.get("/api/export", response_model=ExportOut)
    def get_export(fps: float | None = None):
        effective = fps if fps is not None else state.manifest.output_fps
        return ExportOut(fps=effective, csv=state.export_csv(effective))

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
