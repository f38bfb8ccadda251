// Orchestrates the review workflow: holds the last snapshot and the view
// state, turns user intents into validated correction drafts, and submits
// them. A failed submission never loses the draft.

import { ApiError, ReviewClient } from "./api.js";
import { buildDraft, clampPlayhead, initialView, toggleSelection, ViewState } from "./state.js";
import type { Correction, CorrectionKind, SessionInfo, TrajectoryWindow } from "./types.js";

export type SubmitOutcome =
    | { applied: true; requestSent: true }
    | { applied: false; requestSent: boolean; reason: string; retryable: boolean };

export class ReviewController {
    view: ViewState = initialView(0, 0);
    session: SessionInfo | null = null;
    snapshot: TrajectoryWindow | null = null;

    constructor(readonly client: ReviewClient, readonly author: string = "reviewer") {}

    async load(): Promise<void> {
        this.session = await this.client.session();
        this.view = initialView(this.session.frame_min, this.session.frame_max);
        await this.refetch();
    }

    async refetch(): Promise<void> {
        this.snapshot = await this.client.window(this.view.windowFrom, this.view.windowTo);
        // drop selections that no longer resolve
        const ids = new Set(this.snapshot.trajectories.map((t) => t.id));
        this.view = { ...this.view, selected: this.view.selected.filter((id) => ids.has(id)) };
    }

    select(id: string): void {
        this.view = toggleSelection(this.view, id);
    }

    clearSelection(): void {
        this.view = { ...this.view, selected: [] };
    }

    scrub(frame: number): void {
        this.view = clampPlayhead(this.view, frame);
    }

    /** Validate locally and stage a draft; returns the rejection reason if any. */
    stage(kind: CorrectionKind, extra: Partial<Correction> = {}): string | null {
        if (!this.snapshot) return "no snapshot loaded";
        const { draft, reason } = buildDraft(kind, this.view, this.snapshot, extra);
        this.view = { ...this.view, draft };
        return reason;
    }

    /** Submit the staged draft. On success the window is refetched and the
     * draft cleared; on a service rejection the code is surfaced verbatim
     * and the draft kept; on a network failure the draft is kept and the
     * outcome marked retryable. */
    async submit(): Promise<SubmitOutcome> {
        const draft = this.view.draft;
        if (!draft) {
            return { applied: false, requestSent: false, reason: "no draft staged", retryable: false };
        }
        const payload: Correction = {
            author: this.author,
            timestamp: new Date().toISOString(),
            ...draft,
        };
        try {
            await this.client.postCorrection(payload);
        } catch (err) {
            if (err instanceof ApiError) {
                return { applied: false, requestSent: true, reason: err.code, retryable: false };
            }
            return {
                applied: false,
                requestSent: true,
                reason: err instanceof Error ? err.message : String(err),
                retryable: true,
            };
        }
        this.view = { ...this.view, draft: null };
        await this.refetch();
        return { applied: true, requestSent: true };
    }
}
