import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { renderPayload } from "../src/renderers/index.js";
import type { VisualizationPayload } from "../src/types.js";

const KINDS = [
  "line",
  "scatter_map",
  "force_graph",
  "heatmap",
  "parallel_coords",
  "cluster_map",
] as const;

function fixture(kind: string): VisualizationPayload {
  const path = join(__dirname, "..", "fixtures", `${kind}.json`);
  return JSON.parse(readFileSync(path, "utf-8")) as VisualizationPayload;
}

describe("payload renderers", () => {
  for (const kind of KINDS) {
    it(`renders the ${kind} golden fixture and matches its snapshot`, () => {
      const payload = fixture(kind);
      const panel = renderPayload(payload);
      expect(panel.classList.contains(`panel-${kind}`)).toBe(true);
      expect(panel.querySelector("h3")?.textContent).toBe(payload.title);
      expect(panel.querySelector(".narrative")?.textContent).toBe(payload.narrative);
      expect(panel.querySelector("svg")).not.toBeNull();
      expect(panel.outerHTML).toMatchSnapshot();
    });
  }

  it("falls back to raw JSON for unknown kinds", () => {
    const payload = {
      kind: "sparkline",
      title: "Mystery",
      data: { blob: 1 },
      narrative: "unknown",
      agent: "fusion",
      narrative_source: "template",
    };
    const panel = renderPayload(payload);
    const raw = panel.querySelector("pre.raw-json");
    expect(raw).not.toBeNull();
    expect(raw?.textContent).toContain('"sparkline"');
  });

  it("renders a single-point line payload without crashing", () => {
    const panel = renderPayload({
      kind: "line",
      title: "Degenerate",
      data: {
        series: [{ name: "only", x: [0], y: [0.5] }],
        x_label: "t",
        y_label: "v",
      },
      narrative: "one point",
      agent: "temporal",
      narrative_source: "template",
    });
    expect(panel.querySelectorAll("polyline").length).toBe(1);
  });

  it("gives every cluster in the cluster map a color class", () => {
    const payload = fixture("cluster_map");
    const panel = renderPayload(payload);
    const k = (payload.data as { k: number }).k;
    for (let c = 0; c < k; c += 1) {
      expect(panel.querySelectorAll(`.cluster-${c}`).length).toBeGreaterThan(0);
    }
  });

  it("heatmap renders one labeled cell per matrix entry", () => {
    const payload = fixture("heatmap");
    const matrix = (payload.data as { matrix: number[][] }).matrix;
    const panel = renderPayload(payload);
    expect(panel.querySelectorAll("rect.cell").length).toBe(
      matrix.length * matrix[0].length,
    );
  });
});
