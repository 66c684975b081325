"""Partition agreement scores: normalized mutual information and adjusted Rand index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _ids(p) -> np.ndarray:
    a = getattr(p, "assignment", p)
    _, inverse = np.unique(np.asarray(a), return_inverse=True)
    return inverse.ravel()


def contingency(p, q) -> ContingencyTable:
    """Joint counts of two labelings; rows follow ``p``'s sorted labels, columns ``q``'s."""
    a, b = _ids(p), _ids(q)
    if a.size != b.size:
        raise ValueError(f"partitions cover different item counts: {a.size} vs {b.size}")
    m1 = a.max() + 1 if a.size else 0
    m2 = b.max() + 1 if b.size else 0
    counts = np.bincount(a * m2 + b, minlength=m1 * m2).reshape(m1, m2)
    return ContingencyTable(counts)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def mutual_information(table: ContingencyTable) -> float:
    n = table.total
    nij = table.counts
    a, b = table.row_sums, table.col_sums
    i, j = np.nonzero(nij)
    v = nij[i, j].astype(np.float64)
    return float(max((v / n * (np.log(v * n) - np.log(a[i] * b[j].astype(np.float64)))).sum(), 0.0))


def nmi(p, q, average: str = "arithmetic") -> float:
    """Mutual information over the mean of the two entropies (natural log).

    ``average`` is ``"arithmetic"`` (default) or ``"geometric"``. Two trivial
    partitions score 1; one trivial and one non-trivial partition score 0.
    """
    table = contingency(p, q)
    n = table.total
    h1, h2 = _entropy(table.row_sums, n), _entropy(table.col_sums, n)
    if h1 == 0 and h2 == 0:
        return 1.0
    if h1 == 0 or h2 == 0:
        return 0.0
    if average == "arithmetic":
        denom = 0.5 * (h1 + h2)
    elif average == "geometric":
        denom = np.sqrt(h1 * h2)
    else:
        raise ValueError(f"unknown average {average!r}")
    return float(min(mutual_information(table) / denom, 1.0))


def _pairs(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1) / 2).sum())


def ari(p, q) -> float:
    table = contingency(p, q)
    n = table.total
    if n < 2:
        raise ValueError("ARI needs at least two items")
    index = _pairs(table.counts)
    sum_a, sum_b = _pairs(table.row_sums), _pairs(table.col_sums)
    expected = sum_a * sum_b / (n * (n - 1) / 2)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)
