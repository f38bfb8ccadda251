// Thin fetch client for the review service. Every mutating call resolves
// to either the parsed body or a typed rejection carrying the service's
// error code verbatim.

import type {
    AnomalyItem,
    Correction,
    CorrectionResult,
    SessionInfo,
    TrajectoryWindow,
} from "./types.js";

export class ApiError extends Error {
    constructor(
        readonly status: number,
        readonly code: string,
        message: string,
    ) {
        super(message);
    }
}

async function parseError(resp: Response): Promise<ApiError> {
    let code = "HttpError";
    let message = `${resp.status}`;
    try {
        const body = await resp.json();
        const detail = body?.detail;
        if (detail && typeof detail === "object") {
            code = detail.code ?? code;
            message = detail.message ?? message;
        } else if (typeof detail === "string") {
            message = detail;
        }
    } catch {
        // non-JSON error body: keep defaults
    }
    return new ApiError(resp.status, code, message);
}

export class ReviewClient {
    constructor(readonly base: string = "") {}

    private async get<T>(path: string): Promise<T> {
        const resp = await fetch(this.base + path);
        if (!resp.ok) throw await parseError(resp);
        return (await resp.json()) as T;
    }

    session(): Promise<SessionInfo> {
        return this.get("/api/session");
    }

    window(from?: number, to?: number): Promise<TrajectoryWindow> {
        const params = new URLSearchParams();
        if (from !== undefined) params.set("from", String(from));
        if (to !== undefined) params.set("to", String(to));
        const qs = params.toString();
        return this.get(`/api/trajectories${qs ? "?" + qs : ""}`);
    }

    anomalies(): Promise<AnomalyItem[]> {
        return this.get("/api/anomalies");
    }

    async postCorrection(correction: Correction): Promise<CorrectionResult> {
        const resp = await fetch(this.base + "/api/corrections", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(correction),
        });
        if (!resp.ok) throw await parseError(resp);
        return (await resp.json()) as CorrectionResult;
    }

    async refuse(): Promise<void> {
        const resp = await fetch(this.base + "/api/refuse", { method: "POST" });
        if (!resp.ok) throw await parseError(resp);
    }

    async exportCsv(fps?: number): Promise<string> {
        const qs = fps !== undefined ? `?fps=${fps}` : "";
        const body = await this.get<{ fps: number; csv: string }>(`/api/export${qs}`);
        return body.csv;
    }
}
