"""End-to-end clustering: villages, village network, communities, amalgamation."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import kmeans, metrics, village_graph, wlcf
from .data_io import DataMatrix, standardize
from .kmeans import Partition


@dataclass(frozen=True)
class VillageNetParams:
    k: int = 20
    r: int = 20
    seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    restarts: int = 1
    walk_length: int = 4
    size_penalty: float = 10.0
    max_outer: int = 50
    tol_accept: float = 1e-9
    standardize: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.restarts < 1 or self.kmeans_max_iter < 1:
            raise ValueError("restarts and kmeans_max_iter must be >= 1")
        if min(self.kmeans_tol, self.tol_accept, self.size_penalty) < 0:
            raise ValueError("tolerances and size_penalty must be >= 0")

    def wlcf_params(self) -> wlcf.WLCFParams:
        return wlcf.WLCFParams(
            walk_length=self.walk_length,
            size_penalty=self.size_penalty,
            max_outer=self.max_outer,
            tol_accept=self.tol_accept,
        )


@dataclass
class ClusteringReport:
    final_labels: Partition
    village_labels: Partition
    village_to_cluster: np.ndarray
    m_predicted: int
    timings: Dict[str, float]
    params_used: VillageNetParams
    metrics: Optional[Dict[str, float]] = None
    purity: Optional[Tuple[np.ndarray, float]] = None
    graph: Optional[village_graph.VillageGraph] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        out = {"m_predicted": self.m_predicted, "n_points": len(self.final_labels)}
        out.update({f"param.{k}": v for k, v in asdict(self.params_used).items()})
        out.update({f"time.{k}": v for k, v in self.timings.items()})
        if self.metrics:
            out.update(self.metrics)
        if self.purity is not None:
            out["worst_village_purity"] = self.purity[1]
        return out


def shattering_purity(villages: Partition, labels) -> Tuple[np.ndarray, float]:
    """Majority-label fraction of every village and the minimum over villages."""
    if labels is None:
        raise ValueError("ground-truth labels are required for purity")
    labels = np.asarray(labels)
    if labels.shape != (len(villages),):
        raise ValueError("labels length does not match the partition")
    _, ids = np.unique(labels, return_inverse=True)
    table = metrics.contingency(villages, ids.ravel()).counts
    sizes = table.sum(axis=1)
    per_village = np.divide(table.max(axis=1), sizes, out=np.zeros(len(sizes)), where=sizes > 0)
    occupied = per_village[sizes > 0]
    return per_village, float(occupied.min())


def fit(data, params: VillageNetParams = VillageNetParams(), threads: Optional[int] = None) -> ClusteringReport:
    """Cluster ``data`` and, when it carries labels, score the result against them."""
    if not isinstance(data, DataMatrix):
        data = DataMatrix(np.asarray(data, dtype=np.float64))
    n = data.n_rows
    if params.k > n:
        raise ValueError(f"k={params.k} exceeds N={n}")
    if params.k < 2:
        raise ValueError("k must be >= 2 to build a village network")
    if params.k > n / 2:
        warnings.warn(f"k={params.k} > N/2={n / 2:g}: villages hold fewer than two points on average")

    timings = {}
    t_start = time.perf_counter()
    # labels are stripped so nothing downstream can read them
    x = DataMatrix(data.values)
    if params.standardize:
        x = standardize(x)
    timings["preprocess"] = time.perf_counter() - t_start

    t = time.perf_counter()
    km = kmeans.fit_restarts(
        x,
        params.k,
        seed=params.seed,
        restarts=params.restarts,
        max_iter=params.kmeans_max_iter,
        tol=params.kmeans_tol,
        threads=threads,
    )
    timings["kmeans"] = time.perf_counter() - t

    t = time.perf_counter()
    graph = village_graph.build_graph(x, km.partition, km.centroids, params.r)
    timings["graph"] = time.perf_counter() - t

    t = time.perf_counter()
    state = wlcf.wlcf_run(wlcf.WeightedGraph(graph.adjacency), params.seed, params.wlcf_params())
    timings["wlcf"] = time.perf_counter() - t

    t = time.perf_counter()
    village_to_cluster = state.partition.assignment
    final = Partition(village_to_cluster[km.partition.assignment], state.m)
    timings["amalgamate"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t_start

    report = ClusteringReport(
        final_labels=final,
        village_labels=km.partition,
        village_to_cluster=village_to_cluster,
        m_predicted=state.m,
        timings=timings,
        params_used=params,
        graph=graph,
    )
    if data.labels is not None:
        report.metrics = {
            "nmi": metrics.nmi(final, data.labels),
            "nmi_geometric": metrics.nmi(final, data.labels, average="geometric"),
            "ari": metrics.ari(final, data.labels) if n >= 2 else float("nan"),
        }
        report.purity = shattering_purity(km.partition, data.labels)
    return report
