"""Sensor graphs: blended initial similarity, k-NN sparsification, and
street-adjacency cluster graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import cosine_sim
from ..validation import as_matrix

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class SensorNode:
    id: str
    latitude: float
    longitude: float
    features: np.ndarray
    streets: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        if not np.isfinite(self.latitude) or not np.isfinite(self.longitude):
            raise ValueError(f"node {self.id}: coordinates must be finite")
        if self.features.size == 0:
            raise ValueError(f"node {self.id}: feature vector must be nonempty")
        object.__setattr__(self, "streets", frozenset(self.streets))


@dataclass
class SensorGraph:
    """Weighted digraph over sensors; out-degrees and edge mass kept consistent.

    `edge_mass` is the total outgoing weight (equals the edge count for 0/1
    weights), which is the quantity the diffusion initial condition needs.
    """

    nodes: list
    adjacency: np.ndarray

    def __post_init__(self):
        self.adjacency = as_matrix(self.adjacency, "adjacency")
        n = len(self.nodes)
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency shape must match node count")
        if np.any(self.adjacency < 0):
            raise ValueError("adjacency must be nonnegative")
        self._repair_dangling()

    def _repair_dangling(self) -> None:
        out = self.adjacency.sum(axis=1)
        dangling = out == 0.0
        if np.any(dangling):
            idx = np.where(dangling)[0]
            self.adjacency[idx, idx] = 1.0

    @property
    def out_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def edge_mass(self) -> float:
        return float(self.adjacency.sum())

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency))

    @property
    def node_ids(self) -> list:
        return [node.id for node in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    kind: str  # initial | diffused | cross-graph
    row_ids: tuple = ()
    col_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", as_matrix(self.values, "similarity"))
        if self.kind not in ("initial", "diffused", "cross-graph"):
            raise ValueError(f"unknown similarity kind: {self.kind}")
        if self.kind == "initial":
            vals = self.values
            if vals.shape[0] != vals.shape[1]:
                raise ValueError("initial similarity must be square")
            if not np.allclose(vals, vals.T, atol=1e-9):
                raise ValueError("initial similarity must be symmetric")
            if not np.allclose(np.diag(vals), 1.0, atol=1e-9):
                raise ValueError("initial similarity must have unit diagonal")


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in kilometres."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a)))


def initial_similarity(nodes: list, blend: float = 0.5) -> SimilarityMatrix:
    """Blend of normalized geographic closeness and feature cosine similarity.

    closeness(i, j) = 1 - (g_ij - g_min) / (g_max - g_min) over all node
    pairs; co-located inputs (g_max = g_min) degenerate to closeness 1.
    """
    if len(nodes) < 2:
        raise ValueError("initial similarity needs at least 2 nodes")
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must lie in [0, 1]")
    n = len(nodes)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine_km(
                nodes[i].latitude, nodes[i].longitude,
                nodes[j].latitude, nodes[j].longitude,
            )
            dist[i, j] = dist[j, i] = d
    g_min, g_max = dist.min(), dist.max()
    if g_max == g_min:
        closeness = np.ones((n, n))
    else:
        closeness = 1.0 - (dist - g_min) / (g_max - g_min)

    cos = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            cos[i, j] = cos[j, i] = cosine_sim(nodes[i].features, nodes[j].features)

    values = blend * closeness + (1.0 - blend) * cos
    ids = tuple(node.id for node in nodes)
    return SimilarityMatrix(values=values, kind="initial", row_ids=ids, col_ids=ids)


def build_graph(sim: SimilarityMatrix, nodes: list, k: int = 10) -> SensorGraph:
    """Directed k-nearest-neighbour graph weighted by similarity.

    Negative similarities contribute no edge; dangling nodes get a unit
    self-loop so the diffusion's inverse out-degree matrix exists.
    """
    values = sim.values
    n = values.shape[0]
    if k >= n:
        raise ValueError("k must be smaller than the node count")
    adjacency = np.zeros((n, n))
    for i in range(n):
        order = [j for j in np.argsort(-values[i]) if j != i]
        for j in order[:k]:
            weight = values[i, j]
            if weight > 0:
                adjacency[i, j] = weight
    return SensorGraph(nodes=list(nodes), adjacency=adjacency)


def similarity_to_csv(sim: SimilarityMatrix) -> str:
    """Dense CSV with node ids as header row and leading column."""
    rows = len(sim.values)
    row_ids = list(sim.row_ids) or [f"n{i}" for i in range(rows)]
    col_ids = list(sim.col_ids) or [f"n{j}" for j in range(sim.values.shape[1])]
    lines = ["id," + ",".join(col_ids)]
    for rid, row in zip(row_ids, sim.values):
        lines.append(rid + "," + ",".join(f"{v:.12g}" for v in row))
    return "\n".join(lines) + "\n"


def similarity_from_csv(text: str, kind: str = "diffused") -> SimilarityMatrix:
    lines = [line for line in text.strip().splitlines() if line]
    header = lines[0].split(",")
    if header[0] != "id" or len(header) < 2:
        raise ValueError("similarity CSV must start with an 'id' header column")
    col_ids = tuple(header[1:])
    row_ids, rows = [], []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"row {cells[0]!r}: expected {len(header) - 1} values")
        row_ids.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    return SimilarityMatrix(values=np.array(rows), kind=kind,
                            row_ids=tuple(row_ids), col_ids=col_ids)


def _shared_street(a: SensorNode, b: SensorNode) -> bool:
    return bool(a.streets & b.streets)


def build_cluster_graphs(nodes: list, labels, streets: dict | None = None):
    """Street-adjacency graphs per cluster plus pairwise seed matrices.

    Within a cluster, nodes sharing a street are connected with the cosine
    similarity of their features as weight. Across clusters (i, j), the
    seed matrix holds the same cosine weight wherever a street is shared.
    Nodes absent from the street table are street-less and end up with
    only the dangling-repair self-loop.
    """
    labels = np.asarray(labels, dtype=int)
    if labels.shape[0] != len(nodes):
        raise ValueError("every node must be labeled")
    if streets is not None:
        enriched = []
        for node in nodes:
            members = streets.get(node.id, frozenset())
            enriched.append(
                SensorNode(
                    id=node.id,
                    latitude=node.latitude,
                    longitude=node.longitude,
                    features=node.features,
                    streets=frozenset(members),
                )
            )
        nodes = enriched

    cluster_ids = sorted(int(c) for c in np.unique(labels))
    members = {c: [nodes[i] for i in np.where(labels == c)[0]] for c in cluster_ids}

    graphs = {}
    for c in cluster_ids:
        group = members[c]
        size = len(group)
        adjacency = np.zeros((size, size))
        for i in range(size):
            for j in range(size):
                if i != j and _shared_street(group[i], group[j]):
                    adjacency[i, j] = max(
                        cosine_sim(group[i].features, group[j].features), 0.0
                    )
        graphs[c] = SensorGraph(nodes=group, adjacency=adjacency)

    seeds = {}
    for a in cluster_ids:
        for b in cluster_ids:
            ga, gb = members[a], members[b]
            seed = np.zeros((len(ga), len(gb)))
            for i, na in enumerate(ga):
                for j, nb in enumerate(gb):
                    if _shared_street(na, nb):
                        seed[i, j] = max(cosine_sim(na.features, nb.features), 0.0)
            seeds[(a, b)] = seed
    return graphs, seeds
