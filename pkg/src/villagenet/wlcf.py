"""Random-walk community detection on weighted graphs.

Node-level moves (the walk-likelihood refinement) reassign every node to
the community whose walkers visit it most convincingly. A walker population
is started in each community from its internal stationary distribution and
run for ``walk_length`` steps. ``K[i, j]`` is the expected number of visits
it pays to node ``i``; if the community were a closed room, node ``i``
would expect ``lam[i, j] = w_i * ell_j / W_j`` of them.

Each node is scored by a Poisson likelihood ratio of ``K[i, j]`` between
that expectation and the fully mixed one, ``w_i * walk_length / W``. The
ratio is weighted by the community's walker count ``n * W_j / W``. The
global score sums each node's ratio under its own community and subtracts
``size_penalty`` for every community piece beyond one per connected
component. Walks never cross components, so splitting along them is free.
Global moves (bifurcation, merging) are accepted only when they raise the
score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .kmeans import Partition


# graphs up to this many nodes use a cached dense walk operator
DENSE_LIMIT = 2048
MOVE_TOL = 1e-9


class EdgeListError(ValueError):
    """Raised for malformed edge-list input."""


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with non-negative edge weights."""

    adjacency: sparse.csr_matrix
    strengths: np.ndarray = field(init=False, repr=False)
    _pt: sparse.csr_matrix = field(init=False, repr=False)
    # walk operators, dense adjacency and induced subgraphs, built on demand
    _walk_cache: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = sparse.csr_matrix(self.adjacency, dtype=np.float64)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got {a.shape}")
        a.sum_duplicates()
        a.eliminate_zeros()
        if a.nnz and a.data.min() < 0:
            raise ValueError("edge weights must be non-negative")
        if abs(a - a.T).sum() > 1e-9 * max(1.0, abs(a).sum()):
            raise ValueError("adjacency must be symmetric")
        w = np.asarray(a.sum(axis=1)).ravel()
        inv = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)
        # transpose of the row-stochastic transition matrix P[i, j] = A_ij / w_i
        pt = (sparse.diags(inv) @ a).T.tocsr()
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "strengths", w)
        object.__setattr__(self, "_pt", pt)
        object.__setattr__(self, "_walk_cache", {})

    def walk_operator(self, walk_length: int):
        """``sum_{t=1..walk_length} (P^T)^t`` as a dense array, or ``None`` for large graphs."""
        if self.n_nodes > DENSE_LIMIT:
            return None
        op = self._walk_cache.get(walk_length)
        if op is None:
            pt = self._pt.toarray()
            op = np.zeros_like(pt)
            power = np.eye(self.n_nodes)
            for _ in range(walk_length):
                power = pt @ power
                op += power
            self._walk_cache[walk_length] = op
        return op

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def total_strength(self) -> float:
        return float(self.strengths.sum())

    @property
    def isolated(self) -> np.ndarray:
        return self.strengths == 0

    def subgraph(self, nodes: np.ndarray) -> "WeightedGraph":
        key = ("sub", np.asarray(nodes, dtype=np.int64).tobytes())
        sub = self._walk_cache.get(key)
        if sub is None:
            sub = WeightedGraph(self.adjacency[nodes][:, nodes])
            self._walk_cache[key] = sub
        return sub

    def components(self) -> Tuple[int, np.ndarray]:
        if "components" not in self._walk_cache:
            self._walk_cache["components"] = connected_components(self.adjacency, directed=False)
        return self._walk_cache["components"]

    def dense(self):
        if self.n_nodes > DENSE_LIMIT:
            return None
        if "dense" not in self._walk_cache:
            self._walk_cache["dense"] = self.adjacency.toarray()
        return self._walk_cache["dense"]

    @classmethod
    def from_village_graph(cls, graph) -> "WeightedGraph":
        return cls(graph.adjacency)


def read_edge_list(path: Union[str, Path], n_nodes: Optional[int] = None) -> WeightedGraph:
    """Parse ``U V w`` lines (0-indexed, whitespace separated) into a graph.

    Repeated pairs accumulate. Blank lines and ``#`` comments are skipped.
    """
    rows, cols, vals = [], [], []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise EdgeListError(f"line {lineno}: expected 'U V w', got {line!r}")
            try:
                u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise EdgeListError(f"line {lineno}: cannot parse {line!r}") from None
            if u < 0 or v < 0:
                raise EdgeListError(f"line {lineno}: node ids must be non-negative")
            if not np.isfinite(w) or w < 0:
                raise EdgeListError(f"line {lineno}: weight must be finite and non-negative")
            rows.append(u)
            cols.append(v)
            vals.append(w)
    if not rows:
        raise EdgeListError(f"{path}: no edges")
    n = max(max(rows), max(cols)) + 1
    if n_nodes is not None:
        if n_nodes < n:
            raise EdgeListError(f"node id {n - 1} exceeds n_nodes={n_nodes}")
        n = n_nodes
    rows, cols, vals = np.array(rows), np.array(cols), np.array(vals)
    off = rows != cols
    r = np.concatenate([rows, cols[off]])
    c = np.concatenate([cols, rows[off]])
    v = np.concatenate([vals, vals[off]])
    return WeightedGraph(sparse.coo_matrix((v, (r, c)), shape=(n, n)).tocsr())


@dataclass(frozen=True)
class WLCFParams:
    walk_length: int = 4
    size_penalty: float = 10.0
    max_outer: int = 50
    tol_accept: float = 1e-9
    proposals: int = 4
    lookahead: int = 2
    max_refine: int = 50

    def __post_init__(self):
        if self.walk_length < 1:
            raise ValueError(f"walk_length must be >= 1, got {self.walk_length}")
        if self.size_penalty < 0 or self.tol_accept < 0:
            raise ValueError("size_penalty and tol_accept must be >= 0")
        if self.max_outer < 1 or self.proposals < 1 or self.max_refine < 1:
            raise ValueError("max_outer, proposals and max_refine must be >= 1")
        if self.lookahead not in (1, 2):
            raise ValueError(f"lookahead must be 1 or 2, got {self.lookahead}")


@dataclass(frozen=True)
class VisitStatistics:
    visits: np.ndarray  # K, n x m
    inside: np.ndarray  # ell_j
    weighted_sizes: np.ndarray  # W_j


@dataclass(frozen=True)
class CommunityState:
    partition: Partition
    weighted_sizes: np.ndarray
    log_likelihood: float
    walk_length: int

    @property
    def m(self) -> int:
        return self.partition.m


def visit_statistics(graph: WeightedGraph, partition: Partition, walk_length: int) -> VisitStatistics:
    """Expected visits ``K[i, j]`` over ``walk_length`` steps from community ``j``'s start mix."""
    if walk_length < 1:
        raise ValueError(f"walk_length must be >= 1, got {walk_length}")
    if len(partition) != graph.n_nodes:
        raise ValueError("partition does not cover the graph's nodes")
    n, m = graph.n_nodes, partition.m
    lab = partition.assignment
    w = graph.strengths
    sizes = np.bincount(lab, weights=w, minlength=m)
    start = np.zeros((n, m))
    start[np.arange(n), lab] = w
    start /= np.where(sizes > 0, sizes, 1.0)
    op = graph.walk_operator(walk_length)
    if op is not None:
        visits = op @ start
    else:
        visits = np.zeros((n, m))
        x = start
        for _ in range(walk_length):
            x = graph._pt @ x
            visits += x
    inside = np.bincount(lab, weights=visits[np.arange(n), lab], minlength=m)
    return VisitStatistics(visits, inside, sizes)


def node_scores(graph: WeightedGraph, stats: VisitStatistics, walk_length: int) -> np.ndarray:
    """Walker-weighted Poisson log likelihood ratio of each node under each community."""
    n = graph.n_nodes
    total = graph.total_strength
    if total == 0:
        return np.zeros_like(stats.visits)
    w = graph.strengths[:, None]
    sizes = stats.weighted_sizes
    k = stats.visits
    lam = w * (stats.inside / np.where(sizes > 0, sizes, 1.0))[None, :]
    lam0 = w * walk_length / total
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log(lam) - np.log(lam0)
        term = np.where(k > 0, k * log_ratio, 0.0)
    walkers = n * sizes / total
    return walkers[None, :] * (term - (lam - lam0))


def _compact(labels: np.ndarray) -> Tuple[np.ndarray, int]:
    _, inv = np.unique(labels, return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1 if inv.size else 0


def _extra_pieces(graph, labels) -> int:
    """Community pieces beyond one per connected component."""
    n_comp, comp = graph.components()
    pieces = np.unique(labels.astype(np.int64) * n_comp + comp).size
    return int(pieces - n_comp)


def _objective(graph, labels, m, walk_length, penalty) -> float:
    if graph.total_strength == 0:
        return 0.0
    part = Partition(labels, m)
    s = node_scores(graph, visit_statistics(graph, part, walk_length), walk_length)
    return float(s[np.arange(graph.n_nodes), labels].sum()) - penalty * _extra_pieces(graph, labels)


def log_likelihood(graph: WeightedGraph, partition: Partition, params: WLCFParams = WLCFParams()) -> float:
    """Global score: summed own-community node scores minus the per-community penalty."""
    return _objective(graph, partition.assignment, partition.m, params.walk_length, params.size_penalty)


def _state(graph, labels, m, params) -> CommunityState:
    part = Partition(labels, m)
    sizes = np.bincount(labels, weights=graph.strengths, minlength=m)
    return CommunityState(part, sizes, log_likelihood(graph, part, params), params.walk_length)


def _refine_labels(graph, labels, m, walk_length, max_iter):
    labels = labels.copy()
    for _ in range(max_iter):
        stats = visit_statistics(graph, Partition(labels, m), walk_length)
        scores = node_scores(graph, stats, walk_length)
        best = np.argmax(scores, axis=1)
        cur = scores[np.arange(labels.size), labels]
        top = scores[np.arange(labels.size), best]
        # stay put on near ties so rounding noise cannot move a node
        finite = np.isfinite(cur)
        margin = np.where(finite, MOVE_TOL * (1.0 + np.abs(np.where(finite, cur, 0.0))), 0.0)
        stay = np.where(finite, top <= cur + margin, top == cur)
        new, m_new = _compact(np.where(stay, labels, best))
        if m_new == m and np.array_equal(new, labels):
            break
        labels, m = new, m_new
    return labels, m


def wla_refine(graph: WeightedGraph, partition: Partition, params: WLCFParams = WLCFParams()) -> CommunityState:
    """Move every node to its best-scoring community until assignments settle.

    A node moves only when its best score beats its current one by more than
    a relative ``MOVE_TOL``; among equal best scores the lowest id wins.
    Communities that lose all their nodes are dropped and ids compacted.
    """
    labels, m = _refine_labels(
        graph, partition.assignment, partition.m, params.walk_length, params.max_refine
    )
    return _state(graph, labels, m, params)


def _split_once(graph, labels, m, community, rng, params):
    """Random balanced 2-coloring of one community, refined on its induced subgraph."""
    nodes = np.flatnonzero(labels == community)
    if nodes.size < 2:
        return None
    sub = graph.subgraph(nodes)
    if sub.total_strength == 0:
        return None
    coloring = np.zeros(nodes.size, dtype=np.int64)
    coloring[rng.permutation(nodes.size)[: nodes.size // 2]] = 1
    coloring, sub_m = _refine_labels(sub, coloring, 2, params.walk_length, params.max_refine)
    if sub_m < 2:
        return None
    out = labels.copy()
    out[nodes[coloring == 1]] = m
    return out, m + 1


def _proposals(graph, labels, m, community, rng, params):
    first = _split_once(graph, labels, m, community, rng, params)
    if first is None:
        return []
    out = []
    grafted = _refine_labels(graph, *first, params.walk_length, params.max_refine)
    if grafted[1] > m:
        out.append(grafted)
    if params.lookahead > 1:
        # split both halves before judging: a good 4-way split can hide behind a poor 2-way one
        cur = first
        for child in (community, m):
            nxt = _split_once(graph, cur[0], cur[1], child, rng, params)
            if nxt is not None:
                cur = nxt
        if cur[1] > first[1]:
            deeper = _refine_labels(graph, *cur, params.walk_length, params.max_refine)
            if deeper[1] > m:
                out.append(deeper)
    return out


def bifurcate(
    graph: WeightedGraph,
    state: CommunityState,
    community: int,
    rng: np.random.Generator,
    params: WLCFParams = WLCFParams(),
) -> Optional[CommunityState]:
    """Try to split ``community``; return the improved state or ``None``."""
    labels, m = state.partition.assignment, state.m
    if not 0 <= community < m:
        raise ValueError(f"community {community} out of range [0, {m})")
    best = None
    for _ in range(params.proposals):
        for cand_labels, cand_m in _proposals(graph, labels, m, community, rng, params):
            cand = _state(graph, cand_labels, cand_m, params)
            options = [cand]
            if cand_m > m + 1:
                # an over-split proposal often hides a good coarser one
                options.append(_merge_pass(graph, cand, params)[0])
            for c in options:
                if c.m > m and (best is None or c.log_likelihood > best.log_likelihood):
                    best = c
    if best is None or best.log_likelihood <= state.log_likelihood + params.tol_accept:
        return None
    return best


def merge(
    graph: WeightedGraph,
    state: CommunityState,
    a: int,
    b: int,
    params: WLCFParams = WLCFParams(),
) -> Optional[CommunityState]:
    """Union communities ``a`` and ``b``, refine, and keep the result only if it scores higher."""
    m = state.m
    if a == b or not (0 <= a < m and 0 <= b < m):
        raise ValueError(f"need two distinct communities in [0, {m}), got {a}, {b}")
    labels = state.partition.assignment.copy()
    labels[labels == b] = a
    labels, m = _compact(labels)
    labels, m = _refine_labels(graph, labels, m, params.walk_length, params.max_refine)
    score = _objective(graph, labels, m, params.walk_length, params.size_penalty)
    if score <= state.log_likelihood + params.tol_accept:
        return None
    return _state(graph, labels, m, params)


def _inter_weights(graph, labels, m) -> List[Tuple[float, int, int]]:
    dense = graph.dense()
    if dense is not None:
        onehot = np.zeros((labels.size, m))
        onehot[np.arange(labels.size), labels] = 1.0
        between = onehot.T @ dense @ onehot
    else:
        onehot = sparse.csr_matrix(
            (np.ones(labels.size), (labels, np.arange(labels.size))), shape=(m, labels.size)
        )
        between = (onehot @ graph.adjacency @ onehot.T).toarray()
    pairs = [(between[a, b], a, b) for a in range(m) for b in range(a + 1, m) if between[a, b] > 0]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    return pairs


def _merge_pass(graph, state, params) -> Tuple[CommunityState, bool]:
    moved = False
    while state.m > 1:
        for _, a, b in _inter_weights(graph, state.partition.assignment, state.m):
            new = merge(graph, state, a, b, params)
            if new is not None:
                state, moved = new, True
                break
        else:
            break
    return state, moved


def _run_component(graph: WeightedGraph, rng: np.random.Generator, params: WLCFParams) -> CommunityState:
    state = _state(graph, np.zeros(graph.n_nodes, dtype=np.int64), 1, params)
    for _ in range(params.max_outer):
        moved = False
        order = np.argsort(-state.partition.sizes, kind="stable")
        for community in order:
            if community >= state.m:
                continue
            new = bifurcate(graph, state, int(community), rng, params)
            if new is not None:
                state, moved = new, True
        state, merged = _merge_pass(graph, state, params)
        if not (moved or merged):
            break
    return state


def wlcf_run(graph: WeightedGraph, seed=0, params: WLCFParams = WLCFParams()) -> CommunityState:
    """Find communities with an automatically chosen count.

    Connected components are searched independently, each with its own
    generator spawned from ``seed``, and their communities concatenated in
    order of each component's lowest node id. The returned score is the
    global score of the combined partition.
    """
    n = graph.n_nodes
    if n == 0:
        raise ValueError("graph has no nodes")
    n_comp, comp = connected_components(graph.adjacency, directed=False)
    streams = np.random.SeedSequence(seed).spawn(n_comp)
    labels = np.empty(n, dtype=np.int64)
    offset = 0
    for c in range(n_comp):
        nodes = np.flatnonzero(comp == c)
        if nodes.size == 1:
            labels[nodes] = offset
            offset += 1
            continue
        sub_state = _run_component(graph.subgraph(nodes), np.random.default_rng(streams[c]), params)
        labels[nodes] = sub_state.partition.assignment + offset
        offset += sub_state.m
    return _state(graph, labels, offset, params)
