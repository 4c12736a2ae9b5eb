"""Louvain modularity optimisation on the undirected projection of a graph."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .graph import CommGraph
from .metrics import total_degree

DEFAULT_SEED = 0
# Safety net against float round-off cycling; integer weights never get here.
MAX_SWEEPS = 10_000


class UndirectedGraph:
    """Weighted undirected graph; ``adj[u][u]`` holds a self-loop's weight."""

    def __init__(self, nodes: Iterable = (), edges: Iterable[tuple] = ()):
        self.adj: dict = {n: {} for n in nodes}
        for e in edges:
            u, v = e[0], e[1]
            w = e[2] if len(e) > 2 else 1
            self.add_edge(u, v, w)

    def add_edge(self, u, v, w=1) -> None:
        self.adj.setdefault(u, {})
        self.adj.setdefault(v, {})
        self.adj[u][v] = self.adj[u].get(v, 0) + w
        if u != v:
            self.adj[v][u] = self.adj[v].get(u, 0) + w

    @property
    def nodes(self) -> list:
        return sorted(self.adj)

    def edges(self) -> list[tuple]:
        """Each undirected edge once, as (u, v, w) with u <= v."""
        return [(u, v, w) for u in sorted(self.adj) for v, w in sorted(self.adj[u].items()) if u <= v]

    def degree(self, u) -> float:
        return sum(w for v, w in self.adj[u].items() if v != u) + 2 * self.adj[u].get(u, 0)

    @property
    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges())

    def scaled(self, factor: float) -> "UndirectedGraph":
        return UndirectedGraph(self.adj, [(u, v, w * factor) for u, v, w in self.edges()])

    def __eq__(self, other) -> bool:
        return isinstance(other, UndirectedGraph) and self.adj == other.adj

    def __repr__(self) -> str:
        return f"UndirectedGraph(nodes={len(self.adj)}, edges={len(self.edges())})"


def project_undirected(g: CommGraph) -> UndirectedGraph:
    """Edge {a, b} weighs weight(a->b) + weight(b->a)."""
    ug = UndirectedGraph(sorted(g.nodes))
    for (s, t), w in sorted(g.edges.items()):
        ug.add_edge(s, t, w)
    return ug


def modularity(ug: UndirectedGraph, assignment: Mapping) -> float | None:
    """Newman-Girvan weighted modularity; None when the graph has no weight."""
    m = ug.total_weight
    if m == 0:
        return None
    missing = set(ug.adj) - set(assignment)
    if missing:
        raise ValueError(f"assignment does not cover nodes: {sorted(missing)[:5]}")
    internal: dict = defaultdict(float)
    tot: dict = defaultdict(float)
    for u, v, w in ug.edges():
        if assignment[u] == assignment[v]:
            internal[assignment[u]] += w
    for u in ug.adj:
        tot[assignment[u]] += ug.degree(u)
    return sum(internal[c] / m - (tot[c] / (2 * m)) ** 2 for c in tot)


@dataclass
class Partition:
    assignment: dict
    modularity: float | None
    levels: list[dict] = field(default_factory=list)
    level_modularity: list[float] = field(default_factory=list)
    members: list[list] = field(default_factory=list)

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def communities(self) -> list[set]:
        groups: dict[int, set] = defaultdict(set)
        for node, c in self.assignment.items():
            groups[c].add(node)
        return [groups[c] for c in sorted(groups)]

    def at_level(self, level: int) -> "Partition":
        """Partition after pass ``level``; levels past the top clamp to the final one."""
        if not self.levels:
            return self
        if level < -len(self.levels):
            raise ValueError(f"level {level} out of range")
        last = min(level, len(self.levels) - 1) if level >= 0 else len(self.levels) + level
        return Partition(
            dict(self.levels[last]),
            self.level_modularity[last],
            self.levels[: last + 1],
            self.level_modularity[: last + 1],
        )

    def to_dict(self) -> dict:
        return {
            "assignment": {str(k): v for k, v in sorted(self.assignment.items())},
            "modularity": self.modularity,
            "levels": [{str(k): v for k, v in sorted(lv.items())} for lv in self.levels],
            "level_modularity": self.level_modularity,
            "members": self.members,
        }


def _relabel(comm: list[int]) -> list[int]:
    labels: dict[int, int] = {}
    return [labels.setdefault(c, len(labels)) for c in comm]


def _one_level(adj: list[dict[int, float]], k: list[float], two_m: float, rng: random.Random) -> tuple[list[int], bool]:
    n = len(adj)
    comm = list(range(n))
    tot = list(k)
    order = list(range(n))
    rng.shuffle(order)
    improved = False
    for _ in range(MAX_SWEEPS):
        moved = False
        for i in order:
            own = comm[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in adj[i].items():
                if j != i:
                    links[comm[j]] += w
            tot[own] -= k[i]

            scores = {c: links[c] * two_m - tot[c] * k[i] for c in links}
            stay = links.get(own, 0) * two_m - tot[own] * k[i]
            best = own
            if scores:
                top = max(scores.values())
                if top > stay:
                    best = min(c for c, v in scores.items() if v == top)
            tot[best] += k[i]
            if best != own:
                comm[i] = best
                moved = improved = True
        if not moved:
            break
    return _relabel(comm), improved


def louvain(ug: UndirectedGraph, seed: int = DEFAULT_SEED) -> Partition:
    """Multi-level Louvain.  Node visit order is sorted ids shuffled by ``seed``."""
    names = ug.nodes
    if ug.total_weight == 0:
        return Partition({n: i for i, n in enumerate(names)}, None)

    index = {n: i for i, n in enumerate(names)}
    adj: list[dict[int, float]] = [{} for _ in names]
    for u, v, w in ug.edges():
        adj[index[u]][index[v]] = w
        adj[index[v]][index[u]] = w
    two_m = 2 * ug.total_weight
    rng = random.Random(seed)

    membership = list(range(len(names)))
    levels: list[dict] = []
    level_q: list[float] = []
    while True:
        k = [sum(w for j, w in row.items() if j != i) + 2 * row.get(i, 0) for i, row in enumerate(adj)]
        comm, improved = _one_level(adj, k, two_m, rng)
        if not improved:
            break
        membership = [comm[c] for c in membership]
        assignment = {names[i]: membership[i] for i in range(len(names))}
        levels.append(assignment)
        level_q.append(modularity(ug, assignment))

        n_comm = max(comm) + 1
        agg: list[dict[int, float]] = [defaultdict(float) for _ in range(n_comm)]
        for i, row in enumerate(adj):
            for j, w in row.items():
                if i < j:
                    a, b = comm[i], comm[j]
                    agg[a][b] += w
                    if a != b:
                        agg[b][a] += w
                elif i == j:
                    agg[comm[i]][comm[i]] += w
        adj = [dict(row) for row in agg]
        if n_comm == 1:
            break

    if not levels:
        assignment = {n: i for i, n in enumerate(names)}
        return Partition(assignment, modularity(ug, assignment))
    return Partition(dict(levels[-1]), level_q[-1], levels, level_q)


def subcommunities(g: CommGraph, seed: int = DEFAULT_SEED, level: int | None = None) -> Partition:
    """Louvain on the projection of ``g``; members sorted by total degree."""
    part = louvain(project_undirected(g), seed=seed)
    if level is not None:
        part = part.at_level(level)
    degree = total_degree(g)
    groups: dict[int, list[str]] = defaultdict(list)
    for node, c in part.assignment.items():
        groups[c].append(node)
    part.members = [sorted(groups[c], key=lambda n: (-degree.get(n, 0), n)) for c in sorted(groups)]
    return part
