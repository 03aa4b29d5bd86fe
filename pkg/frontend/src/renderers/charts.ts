/** One renderer per payload kind; all layouts deterministic for snapshots. */

import type {
  ClusterMapData,
  ForceGraphData,
  HeatmapData,
  LineData,
  ParallelCoordsData,
  ScatterMapData,
} from "../types.js";
import {
  HEIGHT,
  MARGIN,
  PALETTE,
  WIDTH,
  axes,
  el,
  extent,
  fmt,
  linearScale,
  rampColor,
  svgElement,
} from "./svg.js";

export function renderLine(data: LineData): SVGSVGElement {
  const svg = svgElement();
  axes(svg, data.x_label, data.y_label);
  const allY = data.series.flatMap((s) => s.y);
  const [y0, y1] = extent(allY);
  const yScale = linearScale([y0, y1], [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const n = Math.max(...data.series.map((s) => s.x.length));
  const xScale = linearScale([0, Math.max(n - 1, 1)], [MARGIN.left, WIDTH - MARGIN.right]);

  data.series.forEach((series, idx) => {
    const points = series.y
      .map((value, i) => `${xScale(i).toFixed(1)},${yScale(value).toFixed(1)}`)
      .join(" ");
    svg.appendChild(el("polyline", {
      points,
      fill: "none",
      stroke: PALETTE[idx % PALETTE.length],
      "stroke-width": 1.5,
      class: `series series-${series.name}`,
    }));
    svg.appendChild(el("text", {
      x: WIDTH - MARGIN.right - 4,
      y: MARGIN.top + 14 * (idx + 1),
      "text-anchor": "end",
      "font-size": 11,
      fill: PALETTE[idx % PALETTE.length],
    }, series.name));
  });
  svg.appendChild(el("text", {
    x: MARGIN.left - 6, y: HEIGHT - MARGIN.bottom + 4,
    "text-anchor": "end", "font-size": 9, fill: "#666",
  }, fmt(y0)));
  svg.appendChild(el("text", {
    x: MARGIN.left - 6, y: MARGIN.top + 4,
    "text-anchor": "end", "font-size": 9, fill: "#666",
  }, fmt(y1)));
  return svg;
}

function geoScales(points: { lat: number; lon: number }[]) {
  const [lon0, lon1] = extent(points.map((p) => p.lon));
  const [lat0, lat1] = extent(points.map((p) => p.lat));
  return {
    x: linearScale([lon0, lon1], [MARGIN.left + 10, WIDTH - MARGIN.right - 10]),
    y: linearScale([lat0, lat1], [HEIGHT - MARGIN.bottom - 10, MARGIN.top + 10]),
  };
}

export function renderScatterMap(data: ScatterMapData): SVGSVGElement {
  const svg = svgElement();
  axes(svg, "longitude", "latitude");
  const { x, y } = geoScales(data.points);
  const values = data.points.map((p) => p.value ?? 0);
  const [v0, v1] = extent(values);
  for (const point of data.points) {
    const t = v1 > v0 ? ((point.value ?? 0) - v0) / (v1 - v0) : 0.5;
    svg.appendChild(el("circle", {
      cx: x(point.lon).toFixed(1),
      cy: y(point.lat).toFixed(1),
      r: 4,
      fill: rampColor(t),
      stroke: "#333",
      "stroke-width": 0.5,
      class: "sensor-point",
      "data-id": point.id,
    }));
  }
  return svg;
}

export function renderClusterMap(data: ClusterMapData): SVGSVGElement {
  const svg = svgElement();
  axes(svg, "longitude", "latitude");
  const { x, y } = geoScales(data.points);
  for (const point of data.points) {
    const cluster = point.cluster ?? 0;
    svg.appendChild(el("circle", {
      cx: x(point.lon).toFixed(1),
      cy: y(point.lat).toFixed(1),
      r: 5,
      fill: PALETTE[cluster % PALETTE.length],
      stroke: "#222",
      "stroke-width": 0.5,
      class: `cluster-point cluster-${cluster}`,
      "data-id": point.id,
    }));
  }
  const clusters = [...new Set(data.points.map((p) => p.cluster ?? 0))].sort();
  clusters.forEach((cluster, idx) => {
    svg.appendChild(el("circle", {
      cx: WIDTH - MARGIN.right - 70,
      cy: MARGIN.top + 14 * idx + 6,
      r: 4,
      fill: PALETTE[cluster % PALETTE.length],
    }));
    svg.appendChild(el("text", {
      x: WIDTH - MARGIN.right - 60,
      y: MARGIN.top + 14 * idx + 10,
      "font-size": 11,
      fill: "#333",
    }, `cluster ${cluster}`));
  });
  return svg;
}

export function renderForceGraph(data: ForceGraphData): SVGSVGElement {
  // Deterministic circular layout: no physics, stable snapshots.
  const svg = svgElement();
  const cx = WIDTH / 2;
  const cy = HEIGHT / 2;
  const radius = Math.min(WIDTH, HEIGHT) / 2 - 40;
  const position = new Map<string, { x: number; y: number }>();
  data.nodes.forEach((node, idx) => {
    const angle = (2 * Math.PI * idx) / data.nodes.length - Math.PI / 2;
    position.set(node.id, {
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
    });
  });
  const weights = data.edges.map((e) => e.weight);
  const [w0, w1] = extent(weights);
  for (const edge of data.edges) {
    const a = position.get(edge.source);
    const b = position.get(edge.target);
    if (!a || !b) continue;
    const t = w1 > w0 ? (edge.weight - w0) / (w1 - w0) : 0.5;
    svg.appendChild(el("line", {
      x1: a.x.toFixed(1), y1: a.y.toFixed(1),
      x2: b.x.toFixed(1), y2: b.y.toFixed(1),
      stroke: "#888",
      "stroke-opacity": (0.25 + 0.6 * t).toFixed(2),
      "stroke-width": (0.5 + 2 * t).toFixed(2),
      class: "edge",
    }));
  }
  data.nodes.forEach((node, idx) => {
    const p = position.get(node.id)!;
    svg.appendChild(el("circle", {
      cx: p.x.toFixed(1), cy: p.y.toFixed(1), r: 6,
      fill: PALETTE[(node.group ?? idx) % PALETTE.length],
      stroke: "#222", "stroke-width": 0.5,
      class: "graph-node", "data-id": node.id,
    }));
    svg.appendChild(el("text", {
      x: p.x.toFixed(1), y: (p.y - 9).toFixed(1),
      "text-anchor": "middle", "font-size": 9, fill: "#333",
    }, node.id));
  });
  return svg;
}

export function renderHeatmap(data: HeatmapData): SVGSVGElement {
  const svg = svgElement();
  const rows = data.row_labels.length;
  const cols = data.col_labels.length;
  const cellW = (WIDTH - MARGIN.left - MARGIN.right) / cols;
  const cellH = (HEIGHT - MARGIN.top - MARGIN.bottom) / rows;
  const flat = data.matrix.flat();
  const [v0, v1] = extent(flat);
  data.matrix.forEach((row, i) => {
    row.forEach((value, j) => {
      const t = v1 > v0 ? (value - v0) / (v1 - v0) : 0.5;
      svg.appendChild(el("rect", {
        x: (MARGIN.left + j * cellW).toFixed(1),
        y: (MARGIN.top + i * cellH).toFixed(1),
        width: cellW.toFixed(1),
        height: cellH.toFixed(1),
        fill: rampColor(t),
        class: "cell",
      }));
      svg.appendChild(el("text", {
        x: (MARGIN.left + j * cellW + cellW / 2).toFixed(1),
        y: (MARGIN.top + i * cellH + cellH / 2 + 3).toFixed(1),
        "text-anchor": "middle", "font-size": 10,
        fill: t > 0.6 ? "#fff" : "#111",
        class: "cell-value",
      }, fmt(value)));
    });
  });
  data.row_labels.forEach((label, i) => {
    svg.appendChild(el("text", {
      x: MARGIN.left - 4,
      y: (MARGIN.top + i * cellH + cellH / 2 + 3).toFixed(1),
      "text-anchor": "end", "font-size": 10, fill: "#333",
    }, label));
  });
  data.col_labels.forEach((label, j) => {
    svg.appendChild(el("text", {
      x: (MARGIN.left + j * cellW + cellW / 2).toFixed(1),
      y: HEIGHT - MARGIN.bottom + 14,
      "text-anchor": "middle", "font-size": 10, fill: "#333",
    }, label));
  });
  return svg;
}

export function renderParallelCoords(data: ParallelCoordsData): SVGSVGElement {
  const svg = svgElement();
  const axisX = data.axes.map((_, idx) =>
    MARGIN.left + (idx * (WIDTH - MARGIN.left - MARGIN.right)) / Math.max(data.axes.length - 1, 1),
  );
  const scales = data.axes.map((_, idx) => {
    const values = data.lines.map((line) => line.values[idx]);
    return linearScale(extent(values), [HEIGHT - MARGIN.bottom, MARGIN.top]);
  });
  data.axes.forEach((axis, idx) => {
    svg.appendChild(el("line", {
      x1: axisX[idx], y1: MARGIN.top, x2: axisX[idx], y2: HEIGHT - MARGIN.bottom,
      stroke: "#666", "stroke-width": 1, class: "axis",
    }));
    svg.appendChild(el("text", {
      x: axisX[idx], y: HEIGHT - MARGIN.bottom + 16,
      "text-anchor": "middle", "font-size": 10, fill: "#333",
    }, axis));
  });
  data.lines.forEach((line, idx) => {
    const points = line.values
      .map((value, i) => `${axisX[i].toFixed(1)},${scales[i](value).toFixed(1)}`)
      .join(" ");
    svg.appendChild(el("polyline", {
      points,
      fill: "none",
      stroke: PALETTE[idx % PALETTE.length],
      "stroke-width": 2,
      class: `pc-line pc-${idx}`,
    }));
    svg.appendChild(el("text", {
      x: WIDTH - MARGIN.right - 4,
      y: MARGIN.top + 14 * (idx + 1),
      "text-anchor": "end", "font-size": 11,
      fill: PALETTE[idx % PALETTE.length],
    }, line.name));
  });
  return svg;
}
