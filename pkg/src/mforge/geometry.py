"""Dense point-set primitives: point clouds, distance matrices, neighbour ranks.

Everything here works on float64 numpy arrays. Ties between equal distances
are always broken by ascending point index so that results are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ParameterError


@dataclass(frozen=True)
class PointCloud:
    """N points in D-dimensional Euclidean space.

    ``labels`` holds one scalar per point (colour / class id) and ``clean``
    the noise-free ground truth when the cloud was produced synthetically.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    clean: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParameterError(f"points must be a non-empty N x D matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.float64).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise ParameterError(f"labels length {lab.shape[0]} != number of points {pts.shape[0]}")
            object.__setattr__(self, "labels", lab)
        if self.clean is not None:
            cl = np.asarray(self.clean, dtype=np.float64)
            if cl.shape != pts.shape:
                raise ParameterError(f"clean shape {cl.shape} != points shape {pts.shape}")
            object.__setattr__(self, "clean", cl)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_points(self, points) -> "PointCloud":
        return replace(self, points=points)

    def subset(self, idx) -> "PointCloud":
        return PointCloud(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.clean is None else self.clean[idx],
        )


def as_points(cloud) -> np.ndarray:
    """Accept a PointCloud or anything array-like and return an N x D float64 array."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ParameterError(f"expected an N x D matrix, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points contain non-finite coordinates")
    return pts


def pairwise_distances(cloud) -> np.ndarray:
    """Euclidean distance matrix, exactly symmetric with a zero diagonal."""
    x = as_points(cloud)
    if x.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(x))


def _neighbor_order(dist: np.ndarray) -> np.ndarray:
    """Per-row ordering of all points with self first, then by (distance, index)."""
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ParameterError(f"distance matrix must be square, got shape {dist.shape}")
    d = dist.copy()
    np.fill_diagonal(d, -np.inf)
    return np.argsort(d, axis=1, kind="stable")


def knn_indices(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest distinct points of every row (self excluded)."""
    n = np.shape(dist)[0]
    if not (1 <= k <= n - 1):
        raise ParameterError(f"k must satisfy 1 <= k <= N-1 = {n - 1}, got {k}")
    return _neighbor_order(dist)[:, 1 : k + 1]


def rank_matrix(dist: np.ndarray) -> np.ndarray:
    """ranks[i, j] = position of j in i's neighbour list (1 = nearest, self = 0)."""
    order = _neighbor_order(dist)
    n = order.shape[0]
    ranks = np.empty_like(order)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(n)[None, :]
    return ranks
