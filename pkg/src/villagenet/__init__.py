"""Village-Net clustering.

Over-cluster the data into K-Means "villages", link villages whose
boundary regions share points, find communities in that network with
random walks, and give every point its village's community.
"""

from .data_io import DataError, DataMatrix, load_csv, make_two_moons, save_csv, standardize
from .kmeans import Centroids, KMeansResult, Partition
from .metrics import ari, contingency, nmi
from .pipeline import ClusteringReport, VillageNetParams, fit, shattering_purity
from .village_graph import VillageGraph, build_graph, exterior_sets, projection_distance
from .wlcf import CommunityState, WeightedGraph, WLCFParams, read_edge_list, wlcf_run

__version__ = "0.1.0"

__all__ = [
    "DataError", "DataMatrix", "load_csv", "make_two_moons", "save_csv", "standardize",
    "Centroids", "KMeansResult", "Partition",
    "ari", "contingency", "nmi",
    "ClusteringReport", "VillageNetParams", "fit", "shattering_purity",
    "VillageGraph", "build_graph", "exterior_sets", "projection_distance",
    "CommunityState", "WeightedGraph", "WLCFParams", "read_edge_list", "wlcf_run",
]
