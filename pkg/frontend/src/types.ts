/** Mirrors of the service's published payload and plan schemas. */

export type PayloadKind =
  | "line"
  | "scatter_map"
  | "force_graph"
  | "heatmap"
  | "parallel_coords"
  | "cluster_map";

export interface VisualizationPayload {
  kind: PayloadKind | string;
  title: string;
  data: Record<string, unknown>;
  narrative: string;
  agent: string;
  narrative_source: string;
}

export interface TaskPlan {
  intent: string;
  parameters: Record<string, unknown>;
  visualization: string;
  provenance: string;
}

export interface RoundResponse {
  round_index: number;
  plan: TaskPlan | null;
  payloads: VisualizationPayload[];
  clarification: string | null;
}

export interface LineSeries {
  name: string;
  x: (number | string)[];
  y: number[];
}

export interface LineData {
  series: LineSeries[];
  x_label: string;
  y_label: string;
}

export interface MapPoint {
  id: string;
  lat: number;
  lon: number;
  value?: number;
  cluster?: number;
}

export interface ScatterMapData {
  points: MapPoint[];
  value_label?: string;
}

export interface ClusterMapData {
  points: MapPoint[];
  k: number;
  metrics?: { sc: number; ch: number; db: number };
}

export interface ForceGraphData {
  nodes: { id: string; group?: number }[];
  edges: { source: string; target: string; weight: number }[];
}

export interface HeatmapData {
  row_labels: string[];
  col_labels: string[];
  matrix: number[][];
  value_label?: string;
}

export interface ParallelCoordsData {
  axes: string[];
  lines: { name: string; values: number[] }[];
}
