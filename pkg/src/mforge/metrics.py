"""Embedding quality measures between two clouds with matching rows.

Local: KL at length scale 0.1, kNN preservation, trustworthiness.
Global: KL at length scale 100, RMSE between distance matrices, Spearman
correlation of pairwise distances. ``A`` is always the reference (original)
cloud and ``B`` the embedding.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import NumericalError, ParameterError
from .geometry import as_points, knn_indices, pairwise_distances, rank_matrix

DEFAULT_K_RANGE = tuple(range(10, 101, 10))


def _distances(A, B):
    a, b = as_points(A), as_points(B)
    if a.shape[0] != b.shape[0]:
        raise ParameterError(f"clouds differ in size: {a.shape[0]} vs {b.shape[0]}")
    return pairwise_distances(a), pairwise_distances(b)


def density(dist: np.ndarray, sigma: float) -> np.ndarray:
    """Per-point Gaussian-kernel density on diameter-normalised distances, summing to 1."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    diam = dist.max()
    if not diam > 0:
        raise NumericalError("all points coincide; density is undefined")
    d = dist / diam
    p = np.exp(-(d * d) / (sigma * sigma)).sum(axis=1)
    return p / p.sum()


def _kl(da, db, sigma):
    p, q = density(da, sigma), density(db, sigma)
    return float(np.sum(p * (np.log(p) - np.log(q))))


def kl_sigma(A, B, sigma: float) -> float:
    da, db = _distances(A, B)
    if da.shape[0] < 2:
        raise ParameterError("KL needs at least two points")
    return _kl(da, db, sigma)


def _knn(da, db, k, ranks_a=None, nb=None):
    ranks_a = rank_matrix(da) if ranks_a is None else ranks_a
    nb = knn_indices(db, k) if nb is None else nb[:, :k]
    # j is a shared neighbour iff it is among B's k nearest and ranks <= k in A
    hits = np.count_nonzero(np.take_along_axis(ranks_a, nb, axis=1) <= k)
    return hits / (k * da.shape[0])


def knn_preservation(A, B, k: int) -> float:
    return _knn(*_distances(A, B), k)


def _trust(da, db, k, ranks_a=None, nb=None):
    n = da.shape[0]
    if not (1 <= k < n / 2):
        raise ParameterError(f"trustworthiness needs 1 <= k < N/2 (N={n}, k={k})")
    ranks_a = rank_matrix(da) if ranks_a is None else ranks_a
    nb = knn_indices(db, k) if nb is None else nb[:, :k]
    r = np.take_along_axis(ranks_a, nb, axis=1)
    penalty = np.clip(r - k, 0, None).sum()
    return float(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty)


def trustworthiness(A, B, k: int) -> float:
    return _trust(*_distances(A, B), k)


def _upper(d):
    return d[np.triu_indices(d.shape[0], k=1)]


def rmse_distance(A, B) -> float:
    da, db = _distances(A, B)
    if da.shape[0] < 2:
        return 0.0
    diff = _upper(da) - _upper(db)
    return float(np.sqrt(np.mean(diff * diff)))


def _spearman(da, db):
    ra, rb = rankdata(_upper(da)), rankdata(_upper(db))
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra * ra).sum() * (rb * rb).sum())
    if not denom > 0:
        raise NumericalError("Spearman correlation undefined: constant distances")
    return float((ra * rb).sum() / denom)


def spearman_distance(A, B) -> float:
    return _spearman(*_distances(A, B))


@dataclass
class MetricReport:
    kl_01: float
    kl_100: float
    knn: float
    trust: float
    rmse: float
    spear: float
    k_range: list

    def to_dict(self) -> dict:
        return asdict(self)


def metric_report(A, B, k_range: Optional[Sequence[int]] = None) -> MetricReport:
    """All six measures; kNN and Trust are averaged over ``k_range``.

    Values of k that are invalid for the cloud size are dropped with a
    warning (kNN needs k <= N-1, Trust needs k < N/2).
    """
    da, db = _distances(A, B)
    n = da.shape[0]
    ks = list(DEFAULT_K_RANGE if k_range is None else k_range)
    knn_ks = [k for k in ks if 1 <= k <= n - 1]
    trust_ks = [k for k in ks if 1 <= k < n / 2]
    if len(knn_ks) < len(ks) or len(trust_ks) < len(ks):
        warnings.warn(f"k range truncated for N={n}: kNN uses {knn_ks}, Trust uses {trust_ks}", stacklevel=2)
    if not knn_ks or not trust_ks:
        raise ParameterError(f"no valid k in {ks} for N={n}")
    ranks_a = rank_matrix(da)
    nb = knn_indices(db, max(knn_ks))
    diff = _upper(da) - _upper(db)
    return MetricReport(
        kl_01=_kl(da, db, 0.1),
        kl_100=_kl(da, db, 100.0),
        knn=float(np.mean([_knn(da, db, k, ranks_a, nb) for k in knn_ks])),
        trust=float(np.mean([_trust(da, db, k, ranks_a, nb) for k in trust_ks])),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        spear=_spearman(da, db),
        k_range=knn_ks,
    )
