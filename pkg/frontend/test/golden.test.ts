import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { rasterize } from "../src/raster.js";
import { buildScene } from "../src/scene.js";
import { initialView } from "../src/state.js";
import type { TrajectoryWindow } from "../src/types.js";

const fixture: TrajectoryWindow = JSON.parse(
    readFileSync(new URL("./fixtures/snapshot.json", import.meta.url), "utf-8"),
);
const baselinePath = fileURLToPath(new URL("./fixtures/golden_baseline.ppm", import.meta.url));

describe("golden render", () => {
    it("rasterizes the fixed snapshot pixel-identically to the baseline", () => {
        const view = {
            ...initialView(fixture.frame_from, fixture.frame_to),
            playhead: 45,
            selected: ["p1"],
        };
        const scene = buildScene(fixture, view, 640, 480);
        const ppm = rasterize(scene).toPpm();
        if (process.env.UPDATE_GOLDEN === "1" || !existsSync(baselinePath)) {
            writeFileSync(baselinePath, ppm);
        }
        const baseline = new Uint8Array(readFileSync(baselinePath));
        expect(ppm.length).toBe(baseline.length);
        expect(Buffer.compare(Buffer.from(ppm), Buffer.from(baseline))).toBe(0);
    });
});
