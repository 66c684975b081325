"""Lloyd's K-Means with random initialization, used to carve data into villages.

Work is split into fixed-size row blocks. Blocks may be processed by a
thread pool, but partial results are always merged in block order, so the
output does not depend on the number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .data_io import DataMatrix

BLOCK_ROWS = 1 << 15


def default_threads() -> int:
    env = os.environ.get("VILLAGENET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Partition:
    """Assignment of items to groups ``0..m-1``."""

    assignment: np.ndarray
    m: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assignment must be 1-D")
        if a.size and (a.min() < 0 or a.max() >= self.m):
            raise ValueError(f"group ids must lie in [0, {self.m})")
        object.__setattr__(self, "assignment", a)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.m)

    def __len__(self) -> int:
        return self.assignment.size

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Compact arbitrary labels to ids ordered by first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        remap = np.empty_like(order)
        remap[order] = np.arange(order.size)
        return cls(remap[inverse.ravel()], int(order.size))


@dataclass(frozen=True)
class Centroids:
    centers: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centers must be a non-empty k x d array")
        if not np.isfinite(c).all():
            raise ValueError("centers must be finite")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


@dataclass
class KMeansResult:
    partition: Partition
    centroids: Centroids
    iterations: int
    wcss: float
    wcss_history: list


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)


def _map_blocks(fn: Callable[[int, int], object], n: int, threads: int) -> list:
    bounds = [(s, min(s + BLOCK_ROWS, n)) for s in range(0, n, BLOCK_ROWS)]
    if threads <= 1 or len(bounds) == 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def init_random(data, k: int, seed=0) -> Centroids:
    """Pick ``k`` distinct rows uniformly without replacement."""
    x = _values(data)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=False)
    return Centroids(x[idx].copy())


def _assign_block(x, centers, c_sq, start, end):
    xb = x[start:end]
    # |x - c|^2 = |x|^2 - 2 x.c + |c|^2; |x|^2 is constant per row for argmin.
    # In-place to avoid a second N x k temporary; scaling by -2 is exact.
    d = xb @ (-2.0 * centers.T)
    d += c_sq
    lab = np.argmin(d, axis=1)
    x_sq = np.einsum("ij,ij->i", xb, xb)
    dist = np.maximum(d[np.arange(lab.size), lab] + x_sq, 0.0)
    return lab, dist


def _assign(x, centers, threads):
    c_sq = np.einsum("ij,ij->i", centers, centers)
    parts = _map_blocks(lambda s, e: _assign_block(x, centers, c_sq, s, e), x.shape[0], threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def assign(data, centroids: Centroids, threads: Optional[int] = None) -> Partition:
    """Nearest-centroid assignment, ties going to the lowest village index."""
    x = _values(data)
    if x.shape[1] != centroids.centers.shape[1]:
        raise ValueError(
            f"dimension mismatch: data has d={x.shape[1]}, centroids d={centroids.centers.shape[1]}"
        )
    lab, _ = _assign(x, centroids.centers, threads or default_threads())
    return Partition(lab, centroids.k)


def _update(x, labels, k, threads):
    def block(s, e):
        onehot = sparse.csr_matrix(
            (np.ones(e - s), (labels[s:e], np.arange(e - s))), shape=(k, e - s)
        )
        return onehot @ x[s:e]

    sums = np.zeros((k, x.shape[1]))
    for part in _map_blocks(block, x.shape[0], threads):
        sums += part
    counts = np.bincount(labels, minlength=k)
    return sums, counts


def _repair_empty(x, labels, dist, counts, centers):
    """Move the farthest points into empty villages, one per empty village."""
    dist = dist.copy()
    for g in np.flatnonzero(counts == 0):
        # donors must keep at least one member
        order = np.argsort(-dist, kind="stable")
        for i in order:
            if counts[labels[i]] > 1:
                break
        else:
            raise RuntimeError("cannot repair empty village: every village is a singleton")
        counts[labels[i]] -= 1
        labels[i] = g
        counts[g] = 1
        centers[g] = x[i]
        dist[i] = 0.0
    return labels, dist


def fit(
    data,
    k: int,
    seed=0,
    max_iter: int = 100,
    tol: float = 1e-6,
    threads: Optional[int] = None,
) -> KMeansResult:
    """Run Lloyd iterations from a random initialization.

    Stops when no assignment changes, when the largest centroid move falls
    below ``tol`` times the data scale, or after ``max_iter`` iterations.
    The returned centroids are always the means of the returned partition.
    """
    x = _values(data)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    if max_iter < 1 or tol < 0:
        raise ValueError("max_iter must be >= 1 and tol >= 0")
    threads = threads or default_threads()
    centers = init_random(x, k, seed).centers.copy()
    scale = float(np.abs(x).max()) or 1.0

    labels, dist = _assign(x, centers, threads)
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            labels, dist = _repair_empty(x, labels, dist, counts, centers)
        sums, counts = _update(x, labels, k, threads)
        new_centers = sums / counts[:, None]
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        new_labels, dist = _assign(x, centers, threads)
        history.append(_wcss(x, labels, centers))
        if np.array_equal(new_labels, labels) or shift < tol * scale:
            break
        labels = new_labels

    counts = np.bincount(labels, minlength=k)
    if (counts == 0).any():
        labels, dist = _repair_empty(x, labels, dist, counts, centers)
    # hitting max_iter leaves centers one step behind labels
    sums, counts = _update(x, labels, k, threads)
    centers = sums / counts[:, None]
    wcss = _wcss(x, labels, centers)
    return KMeansResult(Partition(labels, k), Centroids(centers), iterations, wcss, history)


def _wcss(x, labels, centers) -> float:
    total = 0.0
    for s in range(0, x.shape[0], BLOCK_ROWS):
        diff = x[s : s + BLOCK_ROWS] - centers[labels[s : s + BLOCK_ROWS]]
        total += float(np.einsum("ij,ij->", diff, diff))
    return total


def wcss(data, partition: Partition, centroids: Centroids) -> float:
    """Within-cluster sum of squared distances."""
    return _wcss(_values(data), partition.assignment, centroids.centers)


def fit_restarts(data, k: int, seed=0, restarts: int = 1, **kwargs) -> KMeansResult:
    """Best of ``restarts`` runs by WCSS, all driven by one seeded generator."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        res = fit(data, k, seed=rng, **kwargs)
        if best is None or res.wcss < best.wcss:
            best = res
    return best
