"""Directed communication graph built from reply trees.

A reply ``m`` by ``a`` creates (or strengthens) the edge ``a -> r`` where
``r`` is the author of the real message ``m`` replies to.  When the parent is
missing (a pruned or dummy container) the reply is attributed to the author
of the thread's opening post.  Self-replies produce no edge.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping

import networkx as nx

from .errors import DataIntegrityError
from .threads import Thread, ThreadNode

Edge = tuple[str, str]


@dataclass(frozen=True)
class CommGraph:
    nodes: frozenset[str]
    edges: Mapping[Edge, float]
    node_message_counts: Mapping[str, float]
    display_names: Mapping[str, str] = field(default_factory=dict)
    edge_messages: Mapping[Edge, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for (src, dst), w in self.edges.items():
            if src == dst:
                raise DataIntegrityError(f"self-loop on {src!r}")
            if src not in self.nodes or dst not in self.nodes:
                raise DataIntegrityError(f"edge {src!r} -> {dst!r} has an endpoint outside the node set")
            if not w > 0:
                raise DataIntegrityError(f"edge {src!r} -> {dst!r} has non-positive weight {w}")

    @classmethod
    def from_edges(
        cls,
        edges: Mapping[Edge, float] | Iterable[Edge],
        nodes: Iterable[str] = (),
        counts: Mapping[str, float] | None = None,
    ) -> "CommGraph":
        """Convenience constructor; message counts default to out-weight."""
        if not isinstance(edges, Mapping):
            weighted: dict[Edge, float] = defaultdict(int)
            for e in edges:
                weighted[e] += 1
            edges = dict(weighted)
        node_set = set(nodes)
        for s, t in edges:
            node_set.update((s, t))
        if counts is None:
            out: dict[str, float] = {n: 0 for n in node_set}
            for (s, _), w in edges.items():
                out[s] += w
            counts = out
        return cls(frozenset(node_set), dict(edges), dict(counts))

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in sorted(self.nodes)}
        for s, t in sorted(self.edges):
            adj[s].append(t)
        return adj

    @cached_property
    def predecessors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in sorted(self.nodes)}
        for s, t in sorted(self.edges):
            adj[t].append(s)
        return adj

    @property
    def total_messages(self) -> float:
        return sum(self.node_message_counts.values())

    def display_name(self, node: str) -> str:
        return self.display_names.get(node, node)

    def subgraph(self, keep: Iterable[str]) -> "CommGraph":
        keep = frozenset(keep) & self.nodes
        edges = {e: w for e, w in self.edges.items() if e[0] in keep and e[1] in keep}
        return CommGraph(
            keep,
            edges,
            {n: self.node_message_counts.get(n, 0) for n in keep},
            {n: self.display_names[n] for n in keep if n in self.display_names},
            {e: self.edge_messages[e] for e in edges if e in self.edge_messages},
        )

    def reweighted(self, edge_fn: Callable[[Edge, float], float], count_fn: Callable[[str, float], float] | None = None) -> "CommGraph":
        return CommGraph(
            self.nodes,
            {e: edge_fn(e, w) for e, w in self.edges.items()},
            {n: (count_fn(n, c) if count_fn else c) for n, c in self.node_message_counts.items()},
            dict(self.display_names),
            dict(self.edge_messages),
        )

    def to_networkx(self, communities: Mapping[str, int] | None = None) -> nx.DiGraph:
        g = nx.DiGraph()
        for n in sorted(self.nodes):
            attrs = {"display_name": self.display_name(n), "messages": self.node_message_counts.get(n, 0)}
            if communities is not None and n in communities:
                attrs["community"] = communities[n]
            g.add_node(n, **attrs)
        for (s, t) in sorted(self.edges):
            g.add_edge(s, t, weight=self.edges[(s, t)])
        return g

    def to_records(self) -> list[dict]:
        records: list[dict] = [
            {"type": "node", "id": n, "display_name": self.display_name(n),
             "messages": self.node_message_counts.get(n, 0)}
            for n in sorted(self.nodes)
        ]
        records.extend(
            {"type": "edge", "src": s, "dst": t, "weight": self.edges[(s, t)],
             "msg_ids": list(self.edge_messages.get((s, t), ()))}
            for s, t in sorted(self.edges)
        )
        return records

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "CommGraph":
        nodes, counts, names, edges, provenance = set(), {}, {}, {}, {}
        for r in records:
            if r["type"] == "node":
                nodes.add(r["id"])
                counts[r["id"]] = r["messages"]
                names[r["id"]] = r["display_name"]
            else:
                e = (r["src"], r["dst"])
                edges[e] = r["weight"]
                provenance[e] = tuple(r.get("msg_ids", ()))
        return cls(frozenset(nodes), edges, counts, names, provenance)


def _parent_index(thread: Thread) -> dict[str, ThreadNode]:
    index: dict[str, ThreadNode] = {}
    for node in thread.root.walk():
        for child in node.children:
            index[child.msg_id] = node
    return index


def _author_lookup(identities: Mapping[str, str] | None) -> Callable:
    def author(msg) -> str:
        if identities is None:
            return msg.sender_email
        try:
            return identities[msg.msg_id]
        except KeyError:
            raise DataIntegrityError("message has no resolved author", msg.msg_id) from None
    return author


def attribute_recipient(
    node: ThreadNode,
    thread: Thread,
    identities: Mapping[str, str] | None = None,
    parents: Mapping[str, ThreadNode] | None = None,
) -> str | None:
    """Author the message in ``node`` was addressed to, or None for the opening post."""
    if node.message is None:
        return None
    author = _author_lookup(identities)
    opening = thread.opening_message
    if node.message.msg_id == opening.msg_id:
        return None
    parent = (parents if parents is not None else _parent_index(thread)).get(node.msg_id)
    if parent is not None and parent.message is not None:
        return author(parent.message)
    return author(opening)


def build_graph(
    threads: Iterable[Thread],
    identities: Mapping[str, str] | None = None,
    display_names: Mapping[str, str] | None = None,
) -> CommGraph:
    author = _author_lookup(identities)
    nodes: set[str] = set()
    counts: dict[str, int] = defaultdict(int)
    edges: dict[Edge, int] = defaultdict(int)
    provenance: dict[Edge, list[str]] = defaultdict(list)
    for thread in threads:
        parents = _parent_index(thread)
        for node in thread.root.walk():
            if node.message is None:
                continue
            a = author(node.message)
            nodes.add(a)
            counts[a] += 1
            r = attribute_recipient(node, thread, identities, parents)
            if r is not None and r != a:
                edges[(a, r)] += 1
                provenance[(a, r)].append(node.msg_id)
    names = {n: display_names[n] for n in nodes if display_names and n in display_names}
    return CommGraph(
        frozenset(nodes),
        dict(edges),
        dict(counts),
        names,
        {e: tuple(sorted(ids)) for e, ids in provenance.items()},
    )


def graphml_bytes(g: CommGraph, communities: Mapping[str, int] | None = None) -> bytes:
    return "\n".join(nx.generate_graphml(g.to_networkx(communities))).encode("utf-8") + b"\n"


def write_graphml(g: CommGraph, path: str | Path, communities: Mapping[str, int] | None = None) -> None:
    Path(path).write_bytes(graphml_bytes(g, communities))


def _dot_quote(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: CommGraph, communities: Mapping[str, int] | None = None, name: str = "commgraph") -> str:
    lines = [f"digraph {_dot_quote(name)} {{"]
    for n in sorted(g.nodes):
        attrs = [f"label={_dot_quote(g.display_name(n))}", f"messages={g.node_message_counts.get(n, 0)}"]
        if communities is not None and n in communities:
            attrs.append(f"community={communities[n]}")
        lines.append(f"  {_dot_quote(n)} [{', '.join(attrs)}];")
    for s, t in sorted(g.edges):
        lines.append(f"  {_dot_quote(s)} -> {_dot_quote(t)} [weight={g.edges[(s, t)]}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(g: CommGraph, path: str | Path, communities: Mapping[str, int] | None = None) -> None:
    Path(path).write_text(to_dot(g, communities), encoding="utf-8")
