/** Payload dispatcher: one panel per payload, raw JSON for unknown kinds. */

import type {
  ClusterMapData,
  ForceGraphData,
  HeatmapData,
  LineData,
  ParallelCoordsData,
  ScatterMapData,
  VisualizationPayload,
} from "../types.js";
import {
  renderClusterMap,
  renderForceGraph,
  renderHeatmap,
  renderLine,
  renderParallelCoords,
  renderScatterMap,
} from "./charts.js";

export function renderPayload(payload: VisualizationPayload): HTMLElement {
  const panel = document.createElement("section");
  panel.className = `panel panel-${payload.kind}`;

  const heading = document.createElement("h3");
  heading.textContent = payload.title;
  panel.appendChild(heading);

  panel.appendChild(renderChart(payload));

  const narrative = document.createElement("p");
  narrative.className = "narrative";
  narrative.textContent = payload.narrative;
  panel.appendChild(narrative);

  const meta = document.createElement("p");
  meta.className = "meta";
  meta.textContent = `${payload.agent} agent`;
  panel.appendChild(meta);
  return panel;
}

function renderChart(payload: VisualizationPayload): Element {
  switch (payload.kind) {
    case "line":
      return renderLine(payload.data as unknown as LineData);
    case "scatter_map":
      return renderScatterMap(payload.data as unknown as ScatterMapData);
    case "cluster_map":
      return renderClusterMap(payload.data as unknown as ClusterMapData);
    case "force_graph":
      return renderForceGraph(payload.data as unknown as ForceGraphData);
    case "heatmap":
      return renderHeatmap(payload.data as unknown as HeatmapData);
    case "parallel_coords":
      return renderParallelCoords(payload.data as unknown as ParallelCoordsData);
    default: {
      const fallback = document.createElement("pre");
      fallback.className = "raw-json";
      fallback.textContent = JSON.stringify(payload, null, 2);
      return fallback;
    }
  }
}

export * from "./charts.js";
