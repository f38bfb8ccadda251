// Wire types of the review service API.

export type Sample = [frame: number, x: number, y: number];

export interface Segment {
    start: number;
    end: number;
    kind: string; // "pair" | "single" | "interp" | "imported" | "cart"
    cameras: string[];
    mean_reproj_px: number;
}

export interface Flag {
    kind: string; // "speed_spike" | "gap" | "short_track" | "high_reproj" | "degenerate_pair"
    start: number;
    end: number;
    magnitude: number;
}

export interface Trajectory {
    id: string;
    verified: boolean;
    samples: Sample[];
    segments: Segment[];
    flags: Flag[];
}

export interface TrajectoryWindow {
    frame_from: number;
    frame_to: number;
    trajectories: Trajectory[];
}

export interface SessionStats {
    pedestrian_count: number;
    summed_duration_s: number;
    span_s: number;
    label_freq_hz: number;
    anomaly_counts: Record<string, number>;
    verified_count: number;
    correction_count: number;
    auto_fraction_strict: number | null;
    auto_fraction_partial: number | null;
}

export interface SessionInfo {
    session_id: string;
    fps: number;
    frame_min: number;
    frame_max: number;
    cameras: string[];
    stats: SessionStats;
}

export interface AnomalyItem {
    pedestrian_id: string;
    kind: string;
    start: number;
    end: number;
    magnitude: number;
}

export type CorrectionKind = "merge" | "split" | "relabel" | "delete" | "mark_verified";

export interface Correction {
    kind: CorrectionKind;
    a?: string;
    b?: string;
    id?: string;
    frame?: number;
    old?: string;
    new?: string;
    start?: number;
    end?: number;
    author?: string;
    timestamp?: string;
}

export interface CorrectionResult {
    status: string;
    correction_index: number;
    trajectory_count: number;
}

export interface ServiceError {
    code: string;
    message: string;
}
