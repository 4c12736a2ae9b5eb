"""Topic networks: threads selected by subject line, and their main actor."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError
from .graph import CommGraph, build_graph
from .metrics import total_degree
from .threads import Thread

ROOT_SCOPE = "root"
ANY_SCOPE = "any"


@dataclass(frozen=True)
class TopicQuery:
    """Case-insensitive subject filter.

    Plain patterns match as substrings of the normalized subject; with
    ``regex=True`` the pattern is searched as a regular expression.
    """

    pattern: str
    regex: bool = False
    match_scope: str = ROOT_SCOPE

    def __post_init__(self):
        if not self.pattern:
            raise ConfigError("topic pattern must be non-empty")
        if self.match_scope not in (ROOT_SCOPE, ANY_SCOPE):
            raise ConfigError(f"unknown match scope {self.match_scope!r}")
        if self.regex:
            try:
                re.compile(self.pattern, re.IGNORECASE)
            except re.error as exc:
                raise ConfigError(f"invalid topic regex {self.pattern!r} at position {exc.pos}: {exc.msg}") from None

    @classmethod
    def parse(cls, text: str, match_scope: str = ROOT_SCOPE) -> "TopicQuery":
        """``re:<expr>`` is a regular expression, anything else a substring."""
        if text.startswith("re:"):
            return cls(text[3:], regex=True, match_scope=match_scope)
        return cls(text, match_scope=match_scope)

    @property
    def slug(self) -> str:
        s = re.sub(r"[^a-z0-9]+", "-", self.pattern.casefold()).strip("-")
        return s or "topic"

    def matches(self, subject: str) -> bool:
        if self.regex:
            return re.search(self.pattern, subject, re.IGNORECASE) is not None
        return self.pattern.casefold() in subject.casefold()


def load_queries(path: str | Path, match_scope: str = ROOT_SCOPE) -> list[TopicQuery]:
    """One query per line; blank lines and ``#`` comments are skipped."""
    queries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            queries.append(TopicQuery.parse(line, match_scope))
    return queries


def select_threads(threads: Iterable[Thread], q: TopicQuery) -> list[Thread]:
    out = []
    for t in threads:
        if q.match_scope == ROOT_SCOPE:
            hit = q.matches(t.subject)
        else:
            hit = any(q.matches(m.normalized_subject) for m in t.messages())
        if hit:
            out.append(t)
    return out


def topic_graph(
    threads: Iterable[Thread],
    q: TopicQuery,
    identities: Mapping[str, str] | None = None,
    display_names: Mapping[str, str] | None = None,
) -> CommGraph:
    return build_graph(select_threads(threads, q), identities, display_names)


def main_actor(g: CommGraph) -> str:
    """Highest in+out degree; ties go to more messages, then the smaller id."""
    if not g.nodes:
        raise ValueError("main_actor of an empty graph")
    degree = total_degree(g)
    counts = g.node_message_counts
    return min(g.nodes, key=lambda n: (-degree[n], -counts.get(n, 0), n))
