"""Network measures over a :class:`CommGraph`.

Unweighted measures (reciprocity, degree, betweenness, ego radius) look only
at which edges exist; weights matter for message counts and shares.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .graph import CommGraph

DEFAULT_MULTIPLIERS = (10.0, 20.0, 40.0)
# Sources per betweenness work unit.  Partial sums are always combined in
# the same chunk order, so the result does not depend on the worker count.
BC_CHUNK = 32


def _mutual_edges(g: CommGraph) -> int:
    return sum(1 for (s, t) in g.edges if (t, s) in g.edges)


def _sr_exact(g: CommGraph) -> Fraction | None:
    if not g.edges:
        return None
    return Fraction(_mutual_edges(g), len(g.edges))


def reciprocity_sr(g: CommGraph) -> float | None:
    """Fraction of edges whose reverse edge also exists; None without edges."""
    r = _sr_exact(g)
    return None if r is None else float(r)


def glr_undefined_reason(g: CommGraph) -> str | None:
    n, links = len(g.nodes), len(g.edges)
    if n < 2:
        return "fewer than two nodes"
    if links == 0:
        return "no edges"
    if links == n * (n - 1):
        return "complete graph (density 1)"
    return None


def reciprocity_glr(g: CommGraph) -> float | None:
    """Garlaschelli-Loffredo edge reciprocity ``(r - a) / (1 - a)``.

    ``a`` is the edge density ``L / (N (N - 1))``.  Computed exactly with
    rationals and rounded once; None where undefined (see
    :func:`glr_undefined_reason`).
    """
    if glr_undefined_reason(g) is not None:
        return None
    n = len(g.nodes)
    r = _sr_exact(g)
    density = Fraction(len(g.edges), n * (n - 1))
    return float((r - density) / (1 - density))


def in_degree(g: CommGraph) -> dict[str, int]:
    return {n: len(p) for n, p in g.predecessors.items()}


def out_degree(g: CommGraph) -> dict[str, int]:
    return {n: len(s) for n, s in g.successors.items()}


def total_degree(g: CommGraph) -> dict[str, int]:
    ins, outs = in_degree(g), out_degree(g)
    return {n: ins[n] + outs[n] for n in ins}


@dataclass(frozen=True)
class RankRow:
    rank: int
    node: str
    value: float
    messages: float


def rank_nodes(values: dict[str, float], counts: dict[str, float], k: int | None = None) -> list[RankRow]:
    """Descending by value, then by messages sent, then by canonical id."""
    order = sorted(values, key=lambda n: (-values[n], -counts.get(n, 0), n))
    if k is not None:
        order = order[:k]
    return [RankRow(i, n, values[n], counts.get(n, 0)) for i, n in enumerate(order, 1)]


def degree_rankings(g: CommGraph, k: int = 10) -> tuple[list[RankRow], list[RankRow]]:
    counts = dict(g.node_message_counts)
    return rank_nodes(in_degree(g), counts, k), rank_nodes(out_degree(g), counts, k)


def message_share(g: CommGraph, node: str) -> float:
    if node not in g.nodes:
        raise KeyError(f"unknown node {node!r}")
    total = g.total_messages
    if total <= 0:
        raise ValueError("graph carries no messages")
    return g.node_message_counts.get(node, 0) / total


def message_shares(g: CommGraph) -> dict[str, float]:
    total = g.total_messages
    if total <= 0:
        return {}
    return {n: g.node_message_counts.get(n, 0) / total for n in sorted(g.nodes)}


def top_k_share(g: CommGraph, k: int = 10) -> float | None:
    """Combined message share of the top-``k`` actors by out-degree."""
    if g.total_messages <= 0:
        return None
    _, top = degree_rankings(g, k)
    return sum(row.messages for row in top) / g.total_messages


def degree_histogram(g: CommGraph) -> dict[int, int]:
    hist: dict[int, int] = {}
    for d in total_degree(g).values():
        hist[d] = hist.get(d, 0) + 1
    return dict(sorted(hist.items()))


# -- betweenness -------------------------------------------------------------


def _bc_chunk(args: tuple[list[list[int]], range]) -> list[float]:
    succ, sources = args
    n = len(succ)
    bc = [0.0] * n
    for s in sources:
        sigma = [0] * n
        dist = [-1] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma[s], dist[s] = 1, 0
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in succ[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    return bc


def betweenness(g: CommGraph, workers: int = 1) -> dict[str, float]:
    """Unnormalized directed betweenness over ordered source/target pairs."""
    names = sorted(g.nodes)
    index = {name: i for i, name in enumerate(names)}
    succ = [[index[t] for t in g.successors[name]] for name in names]
    n = len(names)
    jobs = [(succ, range(lo, min(lo + BC_CHUNK, n))) for lo in range(0, n, BC_CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_bc_chunk, jobs))
    else:
        partials = [_bc_chunk(job) for job in jobs]
    total = [0.0] * n
    for part in partials:
        for i, x in enumerate(part):
            total[i] += x
    return {name: total[i] for i, name in enumerate(names)}


@dataclass(frozen=True)
class BCThreshold:
    multiplier: float
    count: int
    proportion: float
    mean: float
    degenerate: bool = False


def bc_threshold(
    g: CommGraph, multiplier: float, bc: dict[str, float] | None = None
) -> BCThreshold:
    """Nodes whose betweenness strictly exceeds ``multiplier`` times the mean."""
    if not g.nodes:
        raise ValueError("bc_threshold needs at least one node")
    bc = betweenness(g) if bc is None else bc
    mean = sum(bc.values()) / len(g.nodes)
    if mean == 0:
        return BCThreshold(multiplier, 0, 0.0, 0.0, degenerate=True)
    count = sum(1 for v in bc.values() if v > multiplier * mean)
    return BCThreshold(multiplier, count, count / len(g.nodes), mean)


# -- ego networks ------------------------------------------------------------


def hop_distances(g: CommGraph, source: str, radius: int | None = None) -> dict[str, int]:
    """Undirected BFS distances from ``source``, optionally cut at ``radius``."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        if radius is not None and dist[v] >= radius:
            continue
        for w in (*g.successors[v], *g.predecessors[v]):
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def ego_network(g: CommGraph, actor: str, radius: int = 3) -> CommGraph:
    if actor not in g.nodes:
        raise KeyError(f"unknown actor {actor!r}")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return g.subgraph(hop_distances(g, actor, radius))


# -- aggregate report --------------------------------------------------------


@dataclass
class MetricsReport:
    sr: float | None
    glr: float | None
    in_degree: dict[str, int]
    out_degree: dict[str, int]
    betweenness: dict[str, float]
    message_share: dict[str, float]
    messages_sent: dict[str, float] = field(default_factory=dict)
    node_count: int = 0
    edge_count: int = 0
    message_count: float = 0
    bc_thresholds: list[BCThreshold] = field(default_factory=list)
    top10_share: float | None = None
    notes: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bc_thresholds"] = [asdict(t) for t in self.bc_thresholds]
        return d


def compute_metrics(
    g: CommGraph,
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
    workers: int = 1,
) -> MetricsReport:
    bc = betweenness(g, workers=workers)
    notes = {}
    if not g.edges:
        notes["sr"] = "undefined: no edges"
    reason = glr_undefined_reason(g)
    if reason:
        notes["glr"] = f"undefined: {reason}"
    thresholds = [bc_threshold(g, m, bc) for m in multipliers] if g.nodes else []
    return MetricsReport(
        sr=reciprocity_sr(g),
        glr=reciprocity_glr(g),
        in_degree=in_degree(g),
        out_degree=out_degree(g),
        betweenness=bc,
        message_share=message_shares(g),
        messages_sent={n: g.node_message_counts.get(n, 0) for n in sorted(g.nodes)},
        node_count=len(g.nodes),
        edge_count=len(g.edges),
        message_count=g.total_messages,
        bc_thresholds=thresholds,
        top10_share=top_k_share(g, 10),
        notes=notes,
    )
