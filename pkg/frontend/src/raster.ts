// Deterministic software rasterizer for scenes: integer Bresenham lines
// and square markers into an RGB buffer. Platform-independent by
// construction, which is what the golden-image test needs; the browser
// painter draws the same scene with antialiased canvas strokes.

import type { Scene } from "./scene.js";

export type Rgb = [number, number, number];

export const BACKGROUND: Rgb = [16, 18, 24];
export const EMPTY_TEXT: Rgb = [90, 94, 104];

export const SEGMENT_COLORS: Record<string, Rgb> = {
    pair: [80, 170, 255],
    single: [255, 170, 60],
    interp: [150, 150, 160],
    imported: [120, 200, 120],
    cart: [220, 120, 220],
};

export const MARKER_COLORS: Record<string, Rgb> = {
    speed_spike: [255, 70, 70],
    gap: [255, 220, 70],
    short_track: [200, 120, 255],
    high_reproj: [255, 120, 170],
    degenerate_pair: [120, 255, 230],
};

export const SELECTED_COLOR: Rgb = [255, 255, 255];
export const PLAYHEAD_COLOR: Rgb = [60, 255, 120];

export class Raster {
    readonly data: Uint8Array;

    constructor(readonly width: number, readonly height: number, fill: Rgb = BACKGROUND) {
        this.data = new Uint8Array(width * height * 3);
        for (let i = 0; i < width * height; i++) {
            this.data[3 * i] = fill[0];
            this.data[3 * i + 1] = fill[1];
            this.data[3 * i + 2] = fill[2];
        }
    }

    set(x: number, y: number, color: Rgb): void {
        if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
        const i = 3 * (y * this.width + x);
        this.data[i] = color[0];
        this.data[i + 1] = color[1];
        this.data[i + 2] = color[2];
    }

    line(x0: number, y0: number, x1: number, y1: number, color: Rgb): void {
        let [cx, cy] = [x0, y0];
        const dx = Math.abs(x1 - x0);
        const dy = -Math.abs(y1 - y0);
        const sx = x0 < x1 ? 1 : -1;
        const sy = y0 < y1 ? 1 : -1;
        let err = dx + dy;
        for (;;) {
            this.set(cx, cy, color);
            if (cx === x1 && cy === y1) break;
            const e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                cx += sx;
            }
            if (e2 <= dx) {
                err += dx;
                cy += sy;
            }
        }
    }

    square(cx: number, cy: number, half: number, color: Rgb): void {
        for (let y = cy - half; y <= cy + half; y++) {
            for (let x = cx - half; x <= cx + half; x++) {
                this.set(x, y, color);
            }
        }
    }

    /** P6 binary PPM encoding of the buffer. */
    toPpm(): Uint8Array {
        const header = new TextEncoder().encode(`P6\n${this.width} ${this.height}\n255\n`);
        const out = new Uint8Array(header.length + this.data.length);
        out.set(header);
        out.set(this.data, header.length);
        return out;
    }
}

export function rasterize(scene: Scene): Raster {
    const raster = new Raster(scene.width, scene.height);
    if (scene.empty) {
        // explicit empty state: a centered crossed box
        const cx = Math.floor(scene.width / 2);
        const cy = Math.floor(scene.height / 2);
        raster.square(cx, cy, 10, EMPTY_TEXT);
        raster.line(cx - 14, cy - 14, cx + 14, cy + 14, BACKGROUND);
        return raster;
    }
    for (const poly of scene.polylines) {
        const color = poly.selected
            ? SELECTED_COLOR
            : SEGMENT_COLORS[poly.kind] ?? SEGMENT_COLORS.imported;
        for (let i = 0; i + 1 < poly.points.length; i++) {
            raster.line(
                poly.points[i][0], poly.points[i][1],
                poly.points[i + 1][0], poly.points[i + 1][1],
                color,
            );
        }
        if (poly.points.length === 1) {
            raster.set(poly.points[0][0], poly.points[0][1], color);
        }
    }
    for (const marker of scene.markers) {
        raster.square(marker.at[0], marker.at[1], 2, MARKER_COLORS[marker.kind] ?? SELECTED_COLOR);
    }
    for (const dot of scene.playhead) {
        raster.square(dot.at[0], dot.at[1], 3, PLAYHEAD_COLOR);
    }
    return raster;
}
