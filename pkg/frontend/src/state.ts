// View state and client-side correction validation.
//
// Local validation mirrors the service's structural rules so no request
// is ever sent for a draft that the schema would reject; semantic errors
// the client cannot know about (e.g. an overlapping merge) come back from
// the service and are surfaced verbatim.

import type { Correction, CorrectionKind, TrajectoryWindow } from "./types.js";

export interface ViewState {
    playhead: number;
    selected: string[]; // at most 2 trajectory ids
    windowFrom: number;
    windowTo: number;
    anomalyFilter: string | null;
    draft: Correction | null;
}

export function initialView(frameMin: number, frameMax: number): ViewState {
    return {
        playhead: frameMin,
        selected: [],
        windowFrom: frameMin,
        windowTo: frameMax,
        anomalyFilter: null,
        draft: null,
    };
}

export function clampPlayhead(view: ViewState, frame: number): ViewState {
    const clamped = Math.min(Math.max(frame, view.windowFrom), view.windowTo);
    return { ...view, playhead: Math.round(clamped) };
}

export function toggleSelection(view: ViewState, id: string): ViewState {
    if (view.selected.includes(id)) {
        return { ...view, selected: view.selected.filter((s) => s !== id) };
    }
    const selected = [...view.selected, id];
    // keep the most recent two selections
    return { ...view, selected: selected.slice(-2) };
}

function span(snapshot: TrajectoryWindow, id: string): [number, number] | null {
    const traj = snapshot.trajectories.find((t) => t.id === id);
    if (!traj || traj.samples.length === 0) return null;
    return [traj.samples[0][0], traj.samples[traj.samples.length - 1][0]];
}

/** Build a correction draft from the current selection, or explain why not. */
export function buildDraft(
    kind: CorrectionKind,
    view: ViewState,
    snapshot: TrajectoryWindow,
    extra: Partial<Correction> = {},
): { draft: Correction | null; reason: string | null } {
    const sel = view.selected;
    const exists = (id: string) => snapshot.trajectories.some((t) => t.id === id);
    switch (kind) {
        case "merge": {
            if (sel.length !== 2) return { draft: null, reason: "merge requires exactly 2 selected trajectories" };
            if (!exists(sel[0]) || !exists(sel[1])) return { draft: null, reason: "selection is stale" };
            return { draft: { kind, a: sel[0], b: sel[1], ...extra }, reason: null };
        }
        case "split": {
            if (sel.length !== 1) return { draft: null, reason: "split requires exactly 1 selected trajectory" };
            const s = span(snapshot, sel[0]);
            if (!s) return { draft: null, reason: "selection is stale" };
            const frame = extra.frame ?? view.playhead;
            if (!(s[0] < frame && frame <= s[1])) {
                return { draft: null, reason: `split frame ${frame} outside (${s[0]}, ${s[1]}]` };
            }
            return { draft: { kind, id: sel[0], frame, ...extra }, reason: null };
        }
        case "relabel": {
            if (sel.length !== 1) return { draft: null, reason: "relabel requires exactly 1 selected trajectory" };
            const next = extra.new;
            if (!next) return { draft: null, reason: "relabel requires a new id" };
            if (exists(next)) return { draft: null, reason: `id ${next} already exists` };
            return { draft: { kind, old: sel[0], new: next, ...extra }, reason: null };
        }
        case "delete": {
            if (sel.length !== 1) return { draft: null, reason: "delete requires exactly 1 selected trajectory" };
            const s = span(snapshot, sel[0]);
            if (!s) return { draft: null, reason: "selection is stale" };
            const start = extra.start ?? view.playhead;
            const end = extra.end ?? start;
            if (start > end) return { draft: null, reason: "delete range is inverted" };
            if (end < s[0] || start > s[1]) {
                return { draft: null, reason: `range [${start}, ${end}] does not touch [${s[0]}, ${s[1]}]` };
            }
            return { draft: { kind, id: sel[0], start, end, ...extra }, reason: null };
        }
        case "mark_verified": {
            if (sel.length !== 1) return { draft: null, reason: "verify requires exactly 1 selected trajectory" };
            if (!exists(sel[0])) return { draft: null, reason: "selection is stale" };
            return { draft: { kind, id: sel[0], ...extra }, reason: null };
        }
    }
}
