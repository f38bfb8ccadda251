// Pure top-down scene construction: a deterministic function of
// (snapshot, view, canvas size). The browser painter and the software
// rasterizer both consume the same scene, so rendering behavior is
// testable without a DOM.

import type { Trajectory, TrajectoryWindow } from "./types.js";
import type { ViewState } from "./state.js";

export interface Transform {
    // pixel = (world - offset) * scale, y flipped so north is up
    scale: number;
    offsetX: number;
    offsetY: number;
    height: number;
}

export interface ScenePolyline {
    id: string;
    kind: string; // provenance of the segment this piece belongs to
    selected: boolean;
    verified: boolean;
    points: Array<[number, number]>; // pixel coordinates
}

export interface SceneMarker {
    id: string;
    kind: string; // anomaly kind
    at: [number, number];
    frame: number;
}

export interface PlayheadDot {
    id: string;
    at: [number, number];
}

export interface Scene {
    width: number;
    height: number;
    empty: boolean;
    transform: Transform | null;
    polylines: ScenePolyline[];
    markers: SceneMarker[];
    playhead: PlayheadDot[];
}

const MARGIN_PX = 20;

export function worldToPixel(t: Transform, x: number, y: number): [number, number] {
    return [
        Math.round((x - t.offsetX) * t.scale) + MARGIN_PX,
        t.height - MARGIN_PX - Math.round((y - t.offsetY) * t.scale),
    ];
}

function fitTransform(
    trajectories: Trajectory[],
    width: number,
    height: number,
): Transform | null {
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (const traj of trajectories) {
        for (const [, x, y] of traj.samples) {
            if (x < minX) minX = x;
            if (x > maxX) maxX = x;
            if (y < minY) minY = y;
            if (y > maxY) maxY = y;
        }
    }
    if (!isFinite(minX)) return null;
    const spanX = Math.max(maxX - minX, 1e-6);
    const spanY = Math.max(maxY - minY, 1e-6);
    // one scale for both axes keeps the aspect ratio of the floor plan
    const scale = Math.min(
        (width - 2 * MARGIN_PX) / spanX,
        (height - 2 * MARGIN_PX) / spanY,
    );
    return { scale, offsetX: minX, offsetY: minY, height };
}

function sampleAt(traj: Trajectory, frame: number): [number, number] | null {
    for (const [f, x, y] of traj.samples) {
        if (f === frame) return [x, y];
        if (f > frame) return null;
    }
    return null;
}

function nearestSample(traj: Trajectory, frame: number): [number, number, number] {
    let best = traj.samples[0];
    let bestDist = Math.abs(best[0] - frame);
    for (const s of traj.samples) {
        const d = Math.abs(s[0] - frame);
        if (d < bestDist) {
            best = s;
            bestDist = d;
        }
    }
    return best;
}

export function buildScene(
    snapshot: TrajectoryWindow,
    view: ViewState,
    width: number,
    height: number,
): Scene {
    const trajectories = [...snapshot.trajectories].sort((a, b) =>
        a.id < b.id ? -1 : a.id > b.id ? 1 : 0,
    );
    const usable = trajectories.filter((t) => t.samples.length > 0);
    const transform = fitTransform(usable, width, height);
    if (!transform) {
        return { width, height, empty: true, transform: null, polylines: [], markers: [], playhead: [] };
    }

    const polylines: ScenePolyline[] = [];
    const markers: SceneMarker[] = [];
    const playhead: PlayheadDot[] = [];

    for (const traj of usable) {
        const selected = view.selected.includes(traj.id);
        // one polyline piece per provenance segment, so styling can differ
        for (const seg of traj.segments) {
            const pts: Array<[number, number]> = [];
            for (const [f, x, y] of traj.samples) {
                if (f >= seg.start && f <= seg.end) pts.push(worldToPixel(transform, x, y));
            }
            if (pts.length >= 1) {
                polylines.push({ id: traj.id, kind: seg.kind, selected, verified: traj.verified, points: pts });
            }
        }
        for (const flag of traj.flags) {
            if (view.anomalyFilter && flag.kind !== view.anomalyFilter) continue;
            const s = nearestSample(traj, flag.start);
            markers.push({
                id: traj.id,
                kind: flag.kind,
                at: worldToPixel(transform, s[1], s[2]),
                frame: flag.start,
            });
        }
        const at = sampleAt(traj, view.playhead);
        if (at) playhead.push({ id: traj.id, at: worldToPixel(transform, at[0], at[1]) });
    }

    markers.sort((a, b) => a.frame - b.frame || (a.id < b.id ? -1 : 1));
    return { width, height, empty: false, transform, polylines, markers, playhead };
}
