"""Graph measures: density, edge-to-vertex ratio, clustering coefficient
(exact and triad-sampled), maximum clique, degree assortativity, and
month-over-month repetition ratios.

All functions are pure with respect to the (immutable) input graphs.
Statistics that are undefined on a given input raise
:class:`~txgraph.errors.UndefinedMetricError`; callers writing reports turn
those into empty cells, never zeros.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, InputError, UndefinedMetricError
from .graphs import MonthlyGraph, TxGraph, _MASK, _SHIFT, degree_sequence, encode_pair


@dataclass(frozen=True)
class ClusteringEstimate:
    """Global clustering coefficient 3*triangles/triads.

    For exact results ``samples`` is the triad count and ``triangle_hits``
    is 3x the triangle count, so value == triangle_hits/samples in both
    modes.
    """

    value: float
    samples: int
    triangle_hits: int
    seed: int
    exact: bool


@dataclass(frozen=True)
class CliqueResult:
    size: int
    members: tuple[int, ...]
    exact: bool


def density(n_nodes: int, n_edges: int) -> float:
    """Simple-graph density 2E / (V(V-1)); undefined for fewer than 2 nodes."""
    if n_nodes < 2:
        raise UndefinedMetricError(f"density undefined for {n_nodes} nodes")
    return 2.0 * n_edges / (n_nodes * (n_nodes - 1))


def edge_vertex_ratio(n_nodes: int, n_edges: int) -> float:
    """Edges per node; undefined on the empty node set."""
    if n_nodes < 1:
        raise UndefinedMetricError("edge-to-vertex ratio undefined without nodes")
    return n_edges / n_nodes


def triad_count(graph: TxGraph) -> int:
    """Number of paths of length 2 (open or closed), sum of C(deg, 2)."""
    deg = degree_sequence(graph, "undirected")
    return int(np.sum(deg * (deg - 1)) // 2)


def clustering_exact(graph: TxGraph, *, node_cap: int = 1_000_000) -> ClusteringEstimate:
    """Exact global clustering by full triangle enumeration.

    Uses the degree-ordered orientation so each triangle is counted once at
    its lowest-ranked edge; cost is roughly O(m^{3/2}).  Guarded by a node
    cap because exact counting is not meant for the giant cumulative graphs.
    """
    if graph.n_nodes > node_cap:
        raise CapExceededError(
            f"{graph.n_nodes} nodes exceeds exact-clustering cap {node_cap}"
        )
    deg = degree_sequence(graph, "undirected")
    triads = int(np.sum(deg * (deg - 1)) // 2)
    if triads == 0:
        raise UndefinedMetricError("clustering undefined: no triads")

    indptr, nbrs = graph.adjacency()
    n = len(deg)
    # rank by (degree, position); orientation low rank -> high rank
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), deg))] = np.arange(n)
    higher: list[set[int]] = [set() for _ in range(n)]
    for v in range(n):
        rv = rank[v]
        for w in nbrs[indptr[v] : indptr[v + 1]]:
            if rank[w] > rv:
                higher[v].add(int(w))
    triangles = 0
    for v in range(n):
        hv = higher[v]
        for w in hv:
            triangles += len(hv & higher[w])
    return ClusteringEstimate(
        value=3.0 * triangles / triads,
        samples=triads,
        triangle_hits=3 * triangles,
        seed=0,
        exact=True,
    )


_CHUNK = 1 << 16


def clustering_sampled(graph: TxGraph, samples: int, seed: int) -> ClusteringEstimate:
    """Estimate clustering by sampling triads uniformly.

    A triad center v is drawn with probability proportional to
    deg(v)*(deg(v)-1)/2, then two distinct neighbors of v are drawn
    uniformly; the estimate is the fraction of sampled triads that close
    into a triangle.  This samples the triad population uniformly, so the
    estimator is unbiased for the exact coefficient.

    The sample budget is consumed in fixed-size chunks seeded from
    ``(seed, chunk index)``, so results are reproducible regardless of how
    chunks are scheduled.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    deg = degree_sequence(graph, "undirected")
    weights = (deg * (deg - 1)) // 2
    candidates = np.flatnonzero(weights > 0)
    if len(candidates) == 0:
        raise UndefinedMetricError("clustering undefined: no node of degree >= 2")
    probs = weights[candidates].astype(np.float64)
    probs /= probs.sum()

    indptr, nbrs = graph.adjacency()
    order = graph.sorted_nodes()
    edge_codes = graph.undirected_array()

    n_chunks = (samples + _CHUNK - 1) // _CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    hits = 0
    remaining = samples
    for child in children:
        count = min(_CHUNK, remaining)
        remaining -= count
        rng = np.random.default_rng(child)
        centers = rng.choice(candidates, size=count, p=probs)
        d = deg[centers]
        i = rng.integers(0, d)
        j = rng.integers(0, d - 1)
        j += j >= i
        a = nbrs[indptr[centers] + i]
        b = nbrs[indptr[centers] + j]
        ua, ub = order[a], order[b]
        codes = np.where(ua < ub, (ua << _SHIFT) | ub, (ub << _SHIFT) | ua)
        pos = np.searchsorted(edge_codes, codes)
        pos = np.minimum(pos, len(edge_codes) - 1)
        hits += int(np.sum(edge_codes[pos] == codes))
    return ClusteringEstimate(
        value=hits / samples,
        samples=samples,
        triangle_hits=hits,
        seed=seed,
        exact=False,
    )


class _Budget:
    """Step/time budget for the clique search."""

    def __init__(self, max_steps: int | None, time_limit: float | None):
        self.max_steps = max_steps
        self.deadline = time.monotonic() + time_limit if time_limit is not None else None
        self.steps = 0
        self.exhausted = False

    def tick(self) -> bool:
        self.steps += 1
        if self.max_steps is not None and self.steps > self.max_steps:
            self.exhausted = True
        elif self.deadline is not None and self.steps % 1024 == 0:
            if time.monotonic() > self.deadline:
                self.exhausted = True
        return self.exhausted


def _degeneracy_order(adj: list[set[int]]) -> tuple[list[int], list[int]]:
    """Vertex removal order by repeated minimum degree, ties to smallest id.

    Returns (order, core_number_per_vertex).
    """
    import heapq

    n = len(adj)
    degree = [len(a) for a in adj]
    heap = [(degree[v], v) for v in range(n)]
    heapq.heapify(heap)
    removed = [False] * n
    core = [0] * n
    order = []
    while heap:
        d, v = heapq.heappop(heap)
        if removed[v] or d != degree[v]:
            continue
        removed[v] = True
        core[v] = d  # remaining degree at removal bounds any clique through v
        order.append(v)
        for w in adj[v]:
            if not removed[w]:
                degree[w] -= 1
                heapq.heappush(heap, (degree[w], w))
    return order, core


def _greedy_clique(adj: list[set[int]]) -> list[int]:
    by_degree = sorted(range(len(adj)), key=lambda v: (-len(adj[v]), v))
    clique: list[int] = []
    members: set[int] = set()
    for v in by_degree:
        if members <= adj[v]:
            clique.append(v)
            members.add(v)
    return clique


def _color_bounds(cand: int, masks: list[int]) -> list[tuple[int, int]]:
    """Greedy coloring of the candidate set; returns (vertex, bound) pairs
    in coloring order (bounds non-decreasing)."""
    out: list[tuple[int, int]] = []
    color = 0
    uncolored = cand
    while uncolored:
        color += 1
        avail = uncolored
        while avail:
            v = (avail & -avail).bit_length() - 1
            bit = 1 << v
            avail &= ~bit & ~masks[v]
            uncolored &= ~bit
            out.append((v, color))
    return out


def max_clique(
    graph: TxGraph,
    *,
    max_steps: int | None = None,
    time_limit: float | None = 60.0,
) -> CliqueResult:
    """Exact maximum clique by branch and bound with a coloring upper bound.

    Vertices are processed in degeneracy order, each subproblem restricted
    to later neighbors, which keeps branching width at most the graph
    degeneracy.  When the step or time budget runs out the best clique
    found so far is returned with ``exact=False``.  All orderings break
    ties by smallest node id, so results are deterministic for a fixed
    step budget.
    """
    order = graph.sorted_nodes()
    n = len(order)
    if n == 0:
        return CliqueResult(size=0, members=(), exact=True)
    indptr, nbrs = graph.adjacency()
    adj: list[set[int]] = [
        {int(w) for w in nbrs[indptr[v] : indptr[v + 1]]} for v in range(n)
    ]

    budget = _Budget(max_steps, time_limit)
    best = _greedy_clique(adj)
    best_size = len(best)

    elim, core = _degeneracy_order(adj)
    pos_of = [0] * n
    for i, v in enumerate(elim):
        pos_of[v] = i

    for i, v in enumerate(elim):
        if budget.exhausted:
            break
        if core[v] + 1 <= best_size:
            continue
        later = sorted(w for w in adj[v] if pos_of[w] > i)
        if 1 + len(later) <= best_size:
            continue
        local_index = {w: j for j, w in enumerate(later)}
        masks = [0] * len(later)
        for j, w in enumerate(later):
            m = 0
            for x in adj[w]:
                jx = local_index.get(x)
                if jx is not None:
                    m |= 1 << jx
            masks[j] = m

        stack = [v]

        def expand(cand: int) -> None:
            nonlocal best, best_size
            if budget.tick():
                return
            colored = _color_bounds(cand, masks)
            for w, bound in reversed(colored):
                if budget.exhausted or len(stack) + bound <= best_size:
                    return
                stack.append(later[w])
                nxt = cand & masks[w]
                if nxt:
                    expand(nxt)
                elif len(stack) > best_size:
                    best = list(stack)
                    best_size = len(best)
                stack.pop()
                cand &= ~(1 << w)

        expand((1 << len(later)) - 1)

    members = tuple(sorted(int(order[v]) for v in best))
    return CliqueResult(size=best_size, members=members, exact=not budget.exhausted)


def is_clique(graph: TxGraph, members) -> bool:
    """Pairwise adjacency check for a clique certificate."""
    mem = list(members)
    return all(
        graph.has_undirected_edge(mem[i], mem[j])
        for i in range(len(mem))
        for j in range(i + 1, len(mem))
    )


def assortativity(graph: TxGraph) -> float:
    """Pearson correlation of endpoint degrees over all edges.

    Both orientations of every undirected edge are included, making the
    statistic symmetric.  Undefined when there are no edges or endpoint
    degrees have zero variance (regular graphs).
    """
    if graph.n_undirected == 0:
        raise UndefinedMetricError("assortativity undefined: no edges")
    deg = degree_sequence(graph, "undirected").astype(np.float64)
    src, dst = graph.endpoint_positions("undirected")
    du = deg[src]
    dv = deg[dst]
    x = np.concatenate([du, dv])
    y = np.concatenate([dv, du])
    x -= x.mean()
    y -= y.mean()
    var_x = float(np.dot(x, x))
    var_y = float(np.dot(y, y))
    if var_x <= 0.0 or var_y <= 0.0:
        raise UndefinedMetricError("assortativity undefined: zero degree variance")
    r = float(np.dot(x, y)) / np.sqrt(var_x * var_y)
    return min(1.0, max(-1.0, r))


def _check_consecutive(curr: MonthlyGraph, prev: MonthlyGraph) -> None:
    if curr.month != prev.month + 1:
        raise InputError(
            f"repetition ratio needs consecutive months, got {prev.month} -> {curr.month}"
        )


def repetition_ratio_nodes(curr: MonthlyGraph, prev: MonthlyGraph) -> float:
    """Fraction of this month's nodes already present last month."""
    _check_consecutive(curr, prev)
    if not curr.nodes:
        raise UndefinedMetricError("repetition ratio undefined: empty current month")
    return len(curr.nodes & prev.nodes) / len(curr.nodes)


def repetition_ratio_edges(curr: MonthlyGraph, prev: MonthlyGraph) -> float:
    """Fraction of this month's undirected edges already present last month."""
    _check_consecutive(curr, prev)
    if not curr.undirected:
        raise UndefinedMetricError("repetition ratio undefined: no current edges")
    return len(curr.undirected & prev.undirected) / len(curr.undirected)
