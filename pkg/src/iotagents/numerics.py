"""Dense linear-algebra kernels, normalization, and evaluation metrics.

Everything here is a pure function over float64 arrays; safe to call from
any number of concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import (
    as_float_array,
    as_matrix,
    as_square_matrix,
    as_vector,
    check_labels,
    check_same_length,
)

# Taylor terms below this magnitude no longer move a float64 sum whose
# leading entry is O(1) (guaranteed by scaling the 1-norm under 0.5).
_TAYLOR_TOL = 1e-16
_SCALE_LIMIT = 0.5


def mat_exp(m) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring over a truncated Taylor series.

    The input is halved until its 1-norm drops below 0.5, the series
    sum(M^n / n!) is accumulated until the next term falls below 1e-16,
    and the result is squared back up.
    """
    m = as_square_matrix(m)
    n = m.shape[0]
    if n == 0:
        return np.zeros((0, 0))

    norm = np.linalg.norm(m, 1)
    squarings = 0
    if norm >= _SCALE_LIMIT:
        squarings = int(np.ceil(np.log2(norm / _SCALE_LIMIT)))
    scaled = m / (2.0**squarings)

    result = np.eye(n)
    term = np.eye(n)
    k = 1
    while True:
        term = term @ scaled / k
        result = result + term
        if np.abs(term).max() < _TAYLOR_TOL:
            break
        k += 1

    for _ in range(squarings):
        result = result @ result
    return result


def cosine_sim(u, v) -> float:
    """Cosine similarity of two equal-length vectors; zero vectors score 0."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    check_same_length(u, v, "u and v")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column min/max recorded by :func:`min_max_normalize`."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if np.any(self.maxs < self.mins):
            raise ValueError("max must be >= min per column")

    def normalize(self, values: np.ndarray) -> np.ndarray:
        values = as_float_array(values, "values")
        span = self.maxs - self.mins
        safe = np.where(span == 0.0, 1.0, span)
        out = (values - self.mins) / safe
        return np.where(span == 0.0, 0.0, out)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        values = as_float_array(values, "values")
        return values * (self.maxs - self.mins) + self.mins


def min_max_normalize(column):
    """Scale a column into [0, 1]; a constant column maps to all zeros."""
    col = as_vector(column, "column")
    params = NormalizationParams(mins=col.min(keepdims=True), maxs=col.max(keepdims=True))
    return params.normalize(col), params


def min_max_normalize_matrix(values):
    """Column-wise min-max scaling of a (time x features) matrix."""
    mat = as_matrix(values, "values")
    params = NormalizationParams(mins=mat.min(axis=0), maxs=mat.max(axis=0))
    return params.normalize(mat), params


@dataclass(frozen=True)
class RegressionReport:
    rmse: float
    mae: float
    mape: float
    r2: float

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "mape": self.mape, "r2": self.r2}


def regression_metrics(y, yhat) -> RegressionReport:
    """RMSE / MAE / MAPE / R^2 for a prediction against ground truth.

    MAPE skips zero targets; R^2 on a constant target is reported as NaN.
    """
    y = as_vector(y, "y")
    yhat = as_vector(yhat, "yhat")
    check_same_length(y, yhat, "y and yhat")

    err = y - yhat
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))

    nonzero = y != 0
    if np.any(nonzero):
        mape = float(np.mean(np.abs(err[nonzero]) / np.abs(y[nonzero])))
    else:
        mape = float("nan")

    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = float("nan")
    else:
        r2 = 1.0 - float(np.sum(err**2)) / ss_tot
    return RegressionReport(rmse=rmse, mae=mae, mape=mape, r2=r2)


@dataclass(frozen=True)
class ClusterReport:
    sc: float
    ch: float
    db: float

    def as_dict(self) -> dict:
        return {"sc": self.sc, "ch": self.ch, "db": self.db}


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    # Direct differencing; the Gram-matrix shortcut loses ~1e-8 to cancellation.
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=2))


def silhouette_values(points: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-point silhouette; members of singleton clusters contribute 0."""
    dist = _pairwise_distances(points)
    n = points.shape[0]
    uniq = np.unique(labels)
    values = np.zeros(n)
    sizes = {int(c): int(np.sum(labels == c)) for c in uniq}
    for i in range(n):
        own = int(labels[i])
        if sizes[own] <= 1:
            continue
        a = dist[i, labels == own].sum() / (sizes[own] - 1)
        b = min(
            dist[i, labels == c].mean() for c in uniq if c != own
        )
        denom = max(a, b)
        values[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return values


def clustering_metrics(points, labels) -> ClusterReport:
    """Silhouette, Calinski-Harabasz, and Davies-Bouldin indices."""
    pts = as_matrix(points, "points")
    lab = check_labels(labels, pts.shape[0])
    uniq = np.unique(lab)
    k = uniq.size
    if k < 2:
        raise ValueError("clustering metrics require at least 2 clusters")

    sc = float(silhouette_values(pts, lab).mean())

    n = pts.shape[0]
    overall = pts.mean(axis=0)
    centroids = np.stack([pts[lab == c].mean(axis=0) for c in uniq])
    sizes = np.array([np.sum(lab == c) for c in uniq], dtype=float)
    between = float(np.sum(sizes * np.sum((centroids - overall) ** 2, axis=1)))
    within = float(
        sum(np.sum((pts[lab == c] - centroids[idx]) ** 2) for idx, c in enumerate(uniq))
    )
    if within == 0.0 or n == k:
        ch = float("inf") if between > 0 and within == 0.0 else 0.0
    else:
        ch = (between / (k - 1)) / (within / (n - k))

    scatter = np.array(
        [
            np.mean(np.linalg.norm(pts[lab == c] - centroids[idx], axis=1))
            for idx, c in enumerate(uniq)
        ]
    )
    db_terms = np.zeros(k)
    for i in range(k):
        ratios = [
            (scatter[i] + scatter[j]) / np.linalg.norm(centroids[i] - centroids[j])
            for j in range(k)
            if j != i and np.linalg.norm(centroids[i] - centroids[j]) > 0
        ]
        db_terms[i] = max(ratios) if ratios else 0.0
    db = float(db_terms.mean())

    return ClusterReport(sc=sc, ch=ch, db=db)
