// Browser bootstrap: wires the controller to the DOM. All rendering logic
// lives in scene.ts; this file only paints scenes onto a canvas and
// forwards user events.

import { ReviewClient } from "./api.js";
import { ReviewController } from "./controller.js";
import { buildScene, Scene } from "./scene.js";
import { MARKER_COLORS, PLAYHEAD_COLOR, SEGMENT_COLORS, SELECTED_COLOR } from "./raster.js";
import type { AnomalyItem, CorrectionKind } from "./types.js";

const rgb = (c: [number, number, number]) => `rgb(${c[0]},${c[1]},${c[2]})`;

function paint(ctx: CanvasRenderingContext2D, scene: Scene): void {
    ctx.fillStyle = "#101218";
    ctx.fillRect(0, 0, scene.width, scene.height);
    if (scene.empty) {
        ctx.fillStyle = "#5a5e68";
        ctx.font = "14px sans-serif";
        ctx.textAlign = "center";
        ctx.fillText("no samples in this window", scene.width / 2, scene.height / 2);
        return;
    }
    for (const poly of scene.polylines) {
        ctx.strokeStyle = poly.selected ? rgb(SELECTED_COLOR) : rgb(SEGMENT_COLORS[poly.kind] ?? SEGMENT_COLORS.imported);
        ctx.lineWidth = poly.selected ? 2.5 : poly.kind === "single" ? 1 : 1.5;
        ctx.setLineDash(poly.kind === "interp" ? [4, 3] : []);
        ctx.beginPath();
        poly.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        ctx.setLineDash([]);
    }
    for (const m of scene.markers) {
        ctx.fillStyle = rgb(MARKER_COLORS[m.kind] ?? SELECTED_COLOR);
        ctx.fillRect(m.at[0] - 3, m.at[1] - 3, 6, 6);
    }
    for (const dot of scene.playhead) {
        ctx.fillStyle = rgb(PLAYHEAD_COLOR);
        ctx.beginPath();
        ctx.arc(dot.at[0], dot.at[1], 4, 0, Math.PI * 2);
        ctx.fill();
    }
}

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

async function boot(): Promise<void> {
    const controller = new ReviewController(new ReviewClient(""));
    const canvas = el<HTMLCanvasElement>("topdown");
    const ctx = canvas.getContext("2d")!;
    const scrubber = el<HTMLInputElement>("scrubber");
    const status = el<HTMLElement>("status");
    const anomalyList = el<HTMLElement>("anomalies");
    const trajList = el<HTMLElement>("trajectories");
    const playheadLabel = el<HTMLElement>("playhead-label");

    const redraw = () => {
        if (!controller.snapshot) return;
        paint(ctx, buildScene(controller.snapshot, controller.view, canvas.width, canvas.height));
        playheadLabel.textContent = `frame ${controller.view.playhead}`;
        renderTrajectoryList();
    };

    const say = (text: string, isError = false) => {
        status.textContent = text;
        status.className = isError ? "error" : "";
    };

    function renderTrajectoryList(): void {
        trajList.innerHTML = "";
        for (const traj of controller.snapshot?.trajectories ?? []) {
            const item = document.createElement("li");
            item.textContent = `${traj.id}${traj.verified ? " ✓" : ""} (${traj.samples.length})`;
            if (controller.view.selected.includes(traj.id)) item.classList.add("selected");
            item.onclick = () => {
                controller.select(traj.id);
                redraw();
            };
            trajList.appendChild(item);
        }
    }

    async function renderAnomalies(): Promise<void> {
        const items = await controller.client.anomalies();
        anomalyList.innerHTML = "";
        items.forEach((a: AnomalyItem) => {
            const item = document.createElement("li");
            item.textContent = `${a.kind} ${a.pedestrian_id} @${a.start} (${a.magnitude.toFixed(2)})`;
            item.onclick = () => {
                controller.scrub(a.start);
                controller.clearSelection();
                controller.select(a.pedestrian_id);
                scrubber.value = String(a.start);
                redraw();
            };
            anomalyList.appendChild(item);
        });
    }

    async function applyCorrection(kind: CorrectionKind): Promise<void> {
        let extra = {};
        if (kind === "relabel") {
            const next = window.prompt("new id");
            if (!next) return;
            extra = { new: next };
        }
        if (kind === "delete") {
            const until = window.prompt("delete until frame", String(controller.view.playhead));
            if (until === null) return;
            extra = { start: controller.view.playhead, end: parseInt(until, 10) };
        }
        const rejection = controller.stage(kind, extra);
        if (rejection) {
            say(rejection, true);
            return;
        }
        const outcome = await controller.submit();
        if (outcome.applied) {
            say(`${kind} applied`);
            await renderAnomalies();
        } else {
            say(`${kind} rejected: ${outcome.reason}${outcome.retryable ? " (retry available)" : ""}`, true);
        }
        redraw();
    }

    await controller.load();
    scrubber.min = String(controller.session!.frame_min);
    scrubber.max = String(controller.session!.frame_max);
    scrubber.value = scrubber.min;
    scrubber.oninput = () => {
        controller.scrub(parseInt(scrubber.value, 10));
        redraw();
    };
    for (const kind of ["merge", "split", "relabel", "delete", "mark_verified"] as CorrectionKind[]) {
        el<HTMLButtonElement>(`btn-${kind}`).onclick = () => void applyCorrection(kind);
    }
    el<HTMLButtonElement>("btn-refuse").onclick = async () => {
        say("re-running fusion…");
        await controller.client.refuse();
        await controller.refetch();
        await renderAnomalies();
        say("fusion re-run, corrections replayed");
        redraw();
    };
    const info = controller.session!;
    el<HTMLElement>("session-label").textContent =
        `${info.session_id} · ${info.stats.pedestrian_count} pedestrians · ${info.fps} Hz`;
    await renderAnomalies();
    redraw();
}

void boot();
