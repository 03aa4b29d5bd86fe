/** Small SVG construction helpers shared by the chart renderers. */

export const SVG_NS = "http://www.w3.org/2000/svg";
export const WIDTH = 480;
export const HEIGHT = 300;
export const MARGIN = { top: 24, right: 16, bottom: 36, left: 48 };

export const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
  "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
];

export function svgElement(width = WIDTH, height = HEIGHT): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  return svg;
}

export function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
  text?: string,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

export function extent(values: number[]): [number, number] {
  if (values.length === 0) return [0, 1];
  return [Math.min(...values), Math.max(...values)];
}

export function fmt(value: number): string {
  if (Number.isInteger(value)) return String(value);
  return value.toFixed(Math.abs(value) < 1 ? 3 : 2);
}

/** Blue->red ramp used by the heatmap; input clamped to [0, 1]. */
export function rampColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const r = Math.round(40 + 215 * clamped);
  const g = Math.round(80 + 60 * (1 - Math.abs(clamped - 0.5) * 2));
  const b = Math.round(220 - 180 * clamped);
  return `rgb(${r},${g},${b})`;
}

export function axes(svg: SVGSVGElement, xLabel: string, yLabel: string): void {
  const left = MARGIN.left;
  const bottom = HEIGHT - MARGIN.bottom;
  svg.appendChild(el("line", {
    x1: left, y1: MARGIN.top, x2: left, y2: bottom,
    stroke: "#555", "stroke-width": 1,
  }));
  svg.appendChild(el("line", {
    x1: left, y1: bottom, x2: WIDTH - MARGIN.right, y2: bottom,
    stroke: "#555", "stroke-width": 1,
  }));
  svg.appendChild(el("text", {
    x: (left + WIDTH - MARGIN.right) / 2, y: HEIGHT - 8,
    "text-anchor": "middle", "font-size": 11, fill: "#333",
    class: "x-label",
  }, xLabel));
  svg.appendChild(el("text", {
    x: 12, y: (MARGIN.top + bottom) / 2,
    transform: `rotate(-90 12 ${(MARGIN.top + bottom) / 2})`,
    "text-anchor": "middle", "font-size": 11, fill: "#333",
    class: "y-label",
  }, yLabel));
}
