"""Cart localization from sparse pixel labels.

The pushed cart is labeled either manually (ground contact point) or via
a fiducial tag mounted at a known height; labels are backprojected onto
the ground plane, per-frame multi-camera duplicates are averaged in
metric space, and the sparse result is linearly interpolated onto the
output frame grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import geom
from .errors import NonIntegerRatio, RayParallelToPlane, TooFewLabels
from .fuse import SEGMENT_CART, Segment, Trajectory3D
from .geom import CameraModel, PlaneModel
from .sync import TimeAlignment

CART_ID = "cart"

LABEL_SOURCES = ("manual", "tag")


@dataclass(frozen=True)
class CartLabel:
    """One cart observation in one camera's local frame timeline."""

    camera_id: str
    frame: int
    x: float
    y: float
    source: str

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"label frame must be >= 0, got {self.frame}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("label pixel must be finite")
        if self.source not in LABEL_SOURCES:
            raise ValueError(f"label source must be one of {LABEL_SOURCES}, got {self.source!r}")


def localize_cart(
    labels: Sequence[CartLabel],
    cams: Mapping[str, CameraModel],
    plane: PlaneModel,
    alignment: TimeAlignment,
    tag_height_m: float,
    output_fps: float,
) -> Trajectory3D:
    """Build the continuous cart trajectory (id "cart") on z=0.

    Tag-sourced labels are backprojected with the tag height offset,
    manual labels with offset 0; labels sharing a global frame are
    averaged. The result is sampled on the output-fps grid between the
    first and last label and mapped into the ground frame. Output does
    not depend on the ordering of ``labels``.
    """
    if len(labels) < 2:
        raise TooFewLabels(f"cart localization needs at least 2 labels, got {len(labels)}")
    if tag_height_m < 0:
        raise ValueError(f"tag height must be >= 0, got {tag_height_m}")

    by_frame: dict[int, list[np.ndarray]] = {}
    used_cams = set()
    for lab in labels:
        offset = tag_height_m if lab.source == "tag" else 0.0
        try:
            point = geom.backproject_to_plane(cams[lab.camera_id], (lab.x, lab.y), plane, offset)
        except RayParallelToPlane as e:
            raise RayParallelToPlane(
                f"{e} (cart label at camera {lab.camera_id!r} frame {lab.frame})"
            ) from None
        g = alignment.global_frame(lab.camera_id, lab.frame)
        by_frame.setdefault(g, []).append(point.as_array())
        used_cams.add(lab.camera_id)

    if len(by_frame) < 2:
        raise TooFewLabels("cart labels cover fewer than 2 distinct frames")

    key_frames = np.array(sorted(by_frame), dtype=int)
    key_points = np.array([np.mean(by_frame[int(f)], axis=0) for f in key_frames])

    ratio = alignment.fps / output_fps
    step = round(ratio)
    if step < 1 or abs(ratio - step) > 1e-9:
        raise NonIntegerRatio(
            f"native {alignment.fps:g} Hz is not an integer multiple of output {output_fps:g} Hz"
        )
    grid = np.arange(int(key_frames[0]), int(key_frames[-1]) + 1, step, dtype=int)
    interp = np.column_stack(
        [np.interp(grid, key_frames, key_points[:, k]) for k in range(3)]
    )
    mapped = geom.to_ground_frame_batch(plane, interp)

    return Trajectory3D(
        pedestrian_id=CART_ID,
        frames=grid,
        xy=mapped[:, :2],
        segments=[Segment(int(grid[0]), int(grid[-1]), SEGMENT_CART, tuple(sorted(used_cams)), 0.0)],
        enforce_speed_cap=False,
    )
