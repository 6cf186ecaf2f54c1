"""Vietoris-Rips persistence pairings from a distance matrix.

H0 comes from Kruskal's algorithm: the edges that merge two components are
exactly the death edges of the 0-dimensional classes (a minimum spanning
tree). H1 is optional and comes from reducing the edge/triangle boundary
matrix over GF(2); its cost grows like N^3, hence the size cap.

Edges are ordered by (length, i, j) everywhere, which makes every pairing
deterministic even with tied distances.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import CapacityError, ParameterError

H1_DEFAULT_CAP = 512


@dataclass(frozen=True, order=True)
class FiltrationEdge:
    length: float
    i: int
    j: int

    def __post_init__(self):
        if self.i >= self.j:
            raise ParameterError(f"edge must satisfy i < j, got ({self.i}, {self.j})")


@dataclass
class PersistencePairing:
    dim0_edges: List[FiltrationEdge] = field(default_factory=list)
    dim1_pairs: List[Tuple[FiltrationEdge, FiltrationEdge]] = field(default_factory=list)
    essential: int = 0

    def edge_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Row/column indices of every selected edge: H0 deaths, then (birth, death) per H1 pair."""
        edges = list(self.dim0_edges)
        for creator, destroyer in self.dim1_pairs:
            edges.extend((creator, destroyer))
        i = np.fromiter((e.i for e in edges), dtype=np.int64, count=len(edges))
        j = np.fromiter((e.j for e in edges), dtype=np.int64, count=len(edges))
        return i, j


@dataclass
class Diagram:
    """Finite (birth, death) pairs per homology dimension."""

    points: Dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, dim: int) -> np.ndarray:
        return self.points.get(dim, np.empty((0, 2)))

    def to_records(self) -> List[dict]:
        return [{"dim": dim, "birth": float(b), "death": float(d)}
                for dim in sorted(self.points) for b, d in self.points[dim]]


def _check_dist(dist) -> np.ndarray:
    d = np.asarray(dist, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise ParameterError(f"expected a non-empty square distance matrix, got shape {d.shape}")
    return d


def sorted_edges(dist) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All i < j edges as (i, j, length) arrays in filtration order."""
    d = _check_dist(dist)
    i, j = np.triu_indices(d.shape[0], k=1)
    lengths = d[i, j]
    # lexsort: last key is primary
    order = np.lexsort((j, i, lengths))
    return i[order], j[order], lengths[order]


def vr_h0_pairing(dist) -> Tuple[PersistencePairing, Diagram]:
    d = _check_dist(dist)
    n = d.shape[0]
    ii, jj, ll = sorted_edges(d)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    merges: List[FiltrationEdge] = []
    need = n - 1
    for a, b, length in zip(ii.tolist(), jj.tolist(), ll.tolist()):
        if len(merges) == need:
            break
        ra, rb = find(a), find(b)
        if ra != rb:
            # younger component (larger root index) dies; the diagram does not depend on this
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
            merges.append(FiltrationEdge(length, a, b))
    components = n - len(merges)
    deaths = np.array([[0.0, e.length] for e in merges]).reshape(-1, 2)
    return PersistencePairing(merges, [], components), Diagram({0: deaths})


def vr_h1_pairing(dist, cap: int = H1_DEFAULT_CAP) -> Tuple[List[Tuple[FiltrationEdge, FiltrationEdge]], Diagram]:
    """H1 pairs of the Rips filtration truncated at triangles.

    Each pair is (creating edge, longest edge of the destroying triangle);
    zero-persistence pairs are dropped.
    """
    d = _check_dist(dist)
    n = d.shape[0]
    if n > cap:
        raise CapacityError(f"H1 persistence is capped at {cap} points (got {n}); use H0-only mode")
    if n < 3:
        return [], Diagram({1: np.empty((0, 2))})

    ii, jj, ll = sorted_edges(d)
    rank = np.empty((n, n), dtype=np.int64)
    rank[ii, jj] = np.arange(ii.size)
    rank[jj, ii] = rank[ii, jj]

    a, b, c = (t.ravel() for t in np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"))
    keep = (a < b) & (b < c)
    a, b, c = a[keep], b[keep], c[keep]
    faces = np.sort(np.stack([rank[a, b], rank[a, c], rank[b, c]], axis=1), axis=1)
    # triangles enter with their longest edge; ties resolved by the remaining edges
    order = np.lexsort((faces[:, 0], faces[:, 1], faces[:, 2]))
    faces = faces[order]

    pivot_owner: Dict[int, int] = {}
    reduced: List[int] = []
    pairs = []
    for col, (e0, e1, e2) in enumerate(faces.tolist()):
        column = (1 << e0) | (1 << e1) | (1 << e2)
        while column:
            low = column.bit_length() - 1
            other = pivot_owner.get(low)
            if other is None:
                pivot_owner[low] = col
                birth, death = ll[low], ll[e2]
                if death > birth:
                    pairs.append((FiltrationEdge(float(birth), int(ii[low]), int(jj[low])),
                                  FiltrationEdge(float(death), int(ii[e2]), int(jj[e2]))))
                break
            column ^= reduced[other]
        reduced.append(column)

    dgm = np.array([[p.length, q.length] for p, q in pairs]).reshape(-1, 2)
    return pairs, Diagram({1: dgm})


def vr_pairing(dist, h1: bool = False, cap: int = H1_DEFAULT_CAP) -> Tuple[PersistencePairing, Diagram]:
    pairing, diagram = vr_h0_pairing(dist)
    if h1:
        pairs, dgm1 = vr_h1_pairing(dist, cap)
        pairing.dim1_pairs = pairs
        diagram.points[1] = dgm1[1]
    return pairing, diagram


def select_distances(dist, pairing: PersistencePairing) -> np.ndarray:
    """Distances at the pairing's edges (H0 deaths first, then H1 birth/death edges)."""
    d = _check_dist(dist)
    i, j = pairing.edge_indices()
    if i.size and (max(i.max(), j.max()) >= d.shape[0]):
        raise ParameterError("pairing refers to a point index outside the distance matrix")
    return d[i, j]
