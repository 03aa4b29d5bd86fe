from .clustering import (
    SpectralClusterer,
    evaluate_cluster_counts,
    seeded_kmeans,
    spectral_cluster,
    spectral_embedding,
)
from .diffusion import (
    DiffusionConfig,
    cluster_similarity_matrix,
    cosimheat_cross,
    cosimheat_single,
    euler_reference,
    initial_temperature,
    inter_cluster_similarity,
)
from .graph import (
    SensorGraph,
    SensorNode,
    SimilarityMatrix,
    build_cluster_graphs,
    build_graph,
    haversine_km,
    initial_similarity,
    similarity_from_csv,
    similarity_to_csv,
)

__all__ = [
    "DiffusionConfig",
    "SensorGraph",
    "SensorNode",
    "SimilarityMatrix",
    "SpectralClusterer",
    "build_cluster_graphs",
    "build_graph",
    "cluster_similarity_matrix",
    "cosimheat_cross",
    "cosimheat_single",
    "euler_reference",
    "evaluate_cluster_counts",
    "haversine_km",
    "initial_similarity",
    "initial_temperature",
    "similarity_from_csv",
    "similarity_to_csv",
    "inter_cluster_similarity",
    "seeded_kmeans",
    "spectral_cluster",
    "spectral_embedding",
]
