"""Weighted proximity network between K-Means villages.

Each point ``i`` outside village ``U`` gets a distance ``D(i, U)``: how far
it must move along the line joining its own centroid and ``U``'s centroid
to land on their perpendicular bisector. Village ``U`` claims the ``r``
outside points with the smallest distance as its exterior, and the edge
weight between two villages counts exterior points each claims from the
other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy import sparse

from .kmeans import BLOCK_ROWS, Centroids, Partition, _values


@dataclass(frozen=True)
class ExteriorSet:
    village: int
    members: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class VillageGraph:
    adjacency: sparse.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def node_strengths(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def edges(self):
        """Yield ``(U, V, weight)`` with ``U < V`` in sorted order."""
        upper = sparse.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        for i in order:
            yield int(upper.row[i]), int(upper.col[i]), int(upper.data[i])

    def write_edge_list(self, path: Union[str, Path]) -> None:
        with Path(path).open("w") as fh:
            for u, v, w in self.edges():
                fh.write(f"{u} {v} {w}\n")


def projection_distance(point, own_centroid, other_centroid) -> float:
    """Signed distance from ``point`` to the bisector of its own and another centroid.

    Positive on the own-centroid side of the bisector.
    """
    x = np.asarray(point, dtype=np.float64)
    own = np.asarray(own_centroid, dtype=np.float64)
    other = np.asarray(other_centroid, dtype=np.float64)
    direction = own - other
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("coincident centroids: projection distance is undefined")
    return float((x - 0.5 * (own + other)) @ direction / norm)


def _smallest(values: np.ndarray, r: int) -> np.ndarray:
    """Positions of the ``r`` smallest finite entries, ties to the lowest position."""
    finite = np.isfinite(values)
    n_finite = int(finite.sum())
    if r >= n_finite:
        return np.flatnonzero(finite)
    kth = np.partition(values, r - 1)[r - 1]
    below = np.flatnonzero(values < kth)
    ties = np.flatnonzero(values == kth)[: r - below.size]
    return np.sort(np.concatenate([below, ties]))


def _distance_block(x, labels, centers, c_sq, c_dist, start, end):
    """``D(i, U)`` for rows ``start:end`` and every village; own village is +inf."""
    xb = x[start:end]
    own = labels[start:end]
    rows = np.arange(end - start)
    dots = xb @ centers.T
    num = dots[rows, own][:, None] - dots - 0.5 * (c_sq[own][:, None] - c_sq[None, :])
    den = c_dist[own]
    with np.errstate(divide="ignore", invalid="ignore"):
        d = num / den
    # coincident centroids: treat the other village's points as sitting on the bisector
    d[den == 0] = 0.0
    d[rows, own] = np.inf
    return d


def distance_matrix(data, villages: Partition, centroids: Centroids) -> np.ndarray:
    """Dense N x k matrix of ``D(i, U)``, +inf where ``i`` belongs to ``U``."""
    x = _values(data)
    c = centroids.centers
    c_sq = np.einsum("ij,ij->i", c, c)
    return _distance_block(x, villages.assignment, c, c_sq, _center_dist(c), 0, x.shape[0])


def _center_dist(c: np.ndarray) -> np.ndarray:
    # row by row so coincident centers give exact zeros
    return np.stack([np.linalg.norm(c - c[u], axis=1) for u in range(c.shape[0])])


def _check(villages: Partition, centroids: Centroids, r: int, n: int) -> None:
    if villages.m != centroids.k:
        raise ValueError(f"partition has {villages.m} groups but {centroids.k} centroids")
    if centroids.k < 2:
        raise ValueError("exterior sets need at least two villages")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if len(villages) != n:
        raise ValueError("partition length does not match the data")
    if r > n - 1:
        warnings.warn(f"r={r} exceeds N-1={n - 1}; every outside point joins each exterior")
    elif not 5 <= r <= 100:
        warnings.warn(f"r={r} is outside the usual range [5, 100]")


def exterior_sets(data, villages: Partition, centroids: Centroids, r: int) -> List[ExteriorSet]:
    """For each village, the ``r`` outside points closest to its bisectors."""
    x = _values(data)
    n = x.shape[0]
    _check(villages, centroids, r, n)
    k = centroids.k
    c = centroids.centers
    c_sq = np.einsum("ij,ij->i", c, c)
    c_dist = _center_dist(c)
    labels = villages.assignment

    cand_idx = [[] for _ in range(k)]
    cand_val = [[] for _ in range(k)]
    for start in range(0, n, BLOCK_ROWS):
        end = min(start + BLOCK_ROWS, n)
        d = np.ascontiguousarray(_distance_block(x, labels, c, c_sq, c_dist, start, end).T)
        for u in range(k):
            col = d[u]
            keep = _smallest(col, r)
            cand_idx[u].append(keep + start)
            cand_val[u].append(col[keep])

    out = []
    for u in range(k):
        idx = np.concatenate(cand_idx[u])
        val = np.concatenate(cand_val[u])
        keep = _smallest(val, r)
        # candidates are in ascending point order, so position ties are index ties
        members = idx[keep]
        eps = float(val[keep].max()) if keep.size else float("nan")
        out.append(ExteriorSet(u, members, eps))
    return out


def graph_from_exteriors(exteriors: List[ExteriorSet], villages: Partition) -> VillageGraph:
    k = villages.m
    rows = np.concatenate([np.full(e.members.size, e.village) for e in exteriors] or [[]])
    cols = np.concatenate([villages.assignment[e.members] for e in exteriors] or [[]])
    claimed = sparse.coo_matrix(
        (np.ones(rows.size, dtype=np.int64), (rows.astype(np.int64), cols.astype(np.int64))),
        shape=(k, k),
    ).tocsr()
    adjacency = (claimed + claimed.T).tocsr()
    adjacency.sum_duplicates()
    adjacency.eliminate_zeros()
    return VillageGraph(adjacency)


def build_graph(data, villages: Partition, centroids: Centroids, r: int = 20) -> VillageGraph:
    """Village network with ``A[U, V] = |U_ext & V| + |U & V_ext|``."""
    return graph_from_exteriors(exterior_sets(data, villages, centroids, r), villages)
