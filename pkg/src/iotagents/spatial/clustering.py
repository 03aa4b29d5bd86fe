"""Spectral clustering on similarity matrices, plus cluster-count selection."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from ..numerics import ClusterReport, clustering_metrics
from ..validation import as_matrix

KMEANS_RESTARTS = 10
DB_SLACK = 0.05  # candidate ks sit within 5% of the best Davies-Bouldin


def _kmeans_once(points: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int = 300):
    n = points.shape[0]
    # Greedy k-means++ seeding.
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total == 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    centers = np.array(centers)

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        new_labels = dists.argmin(axis=1)
        for c in range(k):
            mask = new_labels == c
            if np.any(mask):
                centers[c] = points[mask].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    inertia = float(
        sum(np.sum((points[labels == c] - centers[c]) ** 2) for c in range(k))
    )
    return labels, inertia


def seeded_kmeans(points: np.ndarray, k: int, seed: int,
                  restarts: int = KMEANS_RESTARTS):
    """Best-of-restarts Lloyd iterations; deterministic for a seed."""
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _kmeans_once(points, k, rng)
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def spectral_embedding(sim, k: int) -> np.ndarray:
    """Row-normalized eigenbasis of the normalized Laplacian (k smallest)."""
    s = as_matrix(sim, "similarity")
    s = 0.5 * (s + s.T)
    if np.any(s < -1e-9):
        raise ValueError("similarity must be nonnegative")
    s = np.clip(s, 0.0, None)
    degrees = s.sum(axis=1)
    if np.any(degrees <= 0):
        raise ValueError("every node needs positive total similarity")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = np.eye(s.shape[0]) - (inv_sqrt[:, None] * s) * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    _, vectors = eigh(lap, subset_by_index=(0, k - 1))
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vectors / norms


def spectral_cluster(sim, k: int, seed: int = 0) -> np.ndarray:
    """Cluster a (symmetrized) similarity matrix into k groups."""
    s = as_matrix(sim, "similarity")
    n = s.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}]")
    if k == n:
        return np.arange(n)
    embedding = spectral_embedding(s, k)
    labels, _ = seeded_kmeans(embedding, k, seed)
    return labels


def evaluate_cluster_counts(sim, k_range=range(2, 9), seed: int = 0) -> dict:
    """Quality indices per cluster count over the spectral embedding.

    The recommended k has the best Calinski-Harabasz among counts whose
    Davies-Bouldin is within 5% of the sweep's best (lowest) value.
    """
    s = as_matrix(sim, "similarity")
    n = s.shape[0]
    reports: dict[int, ClusterReport] = {}
    for k in k_range:
        if not 2 <= k <= n:
            continue
        embedding = spectral_embedding(s, k)
        if k == n:
            labels = np.arange(n)
        else:
            labels, _ = seeded_kmeans(embedding, k, seed)
        reports[k] = clustering_metrics(embedding, labels)
    if not reports:
        raise ValueError("k_range produced no valid cluster counts")
    best_db = min(rep.db for rep in reports.values())
    candidates = [k for k, rep in reports.items() if rep.db <= best_db * (1 + DB_SLACK)]
    if not candidates:  # best_db == 0 edge case keeps exact zeros only
        candidates = [k for k, rep in reports.items() if rep.db == best_db]
    recommended = max(candidates, key=lambda k: (reports[k].ch, -k))
    return {"reports": reports, "recommended": recommended}


class SpectralClusterer(BaseEstimator, ClusterMixin):
    """Estimator facade over :func:`spectral_cluster` (precomputed affinity)."""

    def __init__(self, n_clusters: int = 5, seed: int = 0):
        self.n_clusters = n_clusters
        self.seed = seed

    def fit(self, X, y=None):
        self.labels_ = spectral_cluster(X, self.n_clusters, self.seed)
        self.embedding_ = spectral_embedding(X, self.n_clusters)
        self.report_ = clustering_metrics(self.embedding_, self.labels_)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def predict(self, X=None):
        labels = getattr(self, "labels_", None)
        if labels is None:
            raise NotFittedError("fit must be called first")
        return labels
