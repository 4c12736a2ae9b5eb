"""Human-readable and machine-readable renderings of analysis results."""

from __future__ import annotations

import csv
import io
from typing import Any, Mapping, Sequence

from .community import Partition
from .metrics import MetricsReport, rank_nodes

NOT_COMPUTED = "not computed"


def format_ratio(x: float | None, digits: int = 3) -> str:
    return "undefined" if x is None else f"{x:.{digits}f}"


def format_percent(x: float | None, digits: int = 1) -> str:
    return "undefined" if x is None else f"{100 * x:.{digits}f}%"


def _csv(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def ranking_csv(values: Mapping[str, float], messages: Mapping[str, float],
                names: Mapping[str, str], k: int | None = None) -> str:
    rows = [(r.rank, r.node, names.get(r.node, r.node), r.value, r.messages)
            for r in rank_nodes(dict(values), dict(messages), k)]
    return _csv(rows, ("rank", "canonical_id", "display_name", "value", "messages"))


def histogram_csv(hist: Mapping[int, int]) -> str:
    return _csv(sorted(hist.items()), ("degree", "nodes"))


def monthly_csv(counts: Mapping[tuple[int, int], int]) -> str:
    return _csv([(f"{y:04d}-{m:02d}", c) for (y, m), c in counts.items()], ("month", "messages"))


def partition_csv(part: Partition) -> str:
    return _csv(sorted(part.assignment.items()), ("canonical_id", "community_id"))


def _table(title: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> list[str]:
    cells = [[str(h) for h in header]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = [title]
    for i, row in enumerate(cells):
        out.append("  " + "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            out.append("  " + "  ".join("-" * w for w in widths))
    return out


def _community_section(title: str, part: Partition | None, names: Mapping[str, str]) -> tuple[list[str], Any]:
    if part is None or not part.assignment:
        return [f"{title}: {NOT_COMPUTED}"], NOT_COMPUTED
    members = part.members or [sorted(c) for c in part.communities()]
    rows = [(i, len(m), ", ".join(names.get(n, n) for n in m)) for i, m in enumerate(members)]
    lines = _table(
        f"{title}: {len(members)} communities, Q = {format_ratio(part.modularity)}",
        ("community", "size", "members"), rows,
    )
    return lines, {"modularity": part.modularity, "communities": members}


def render_report(
    metrics: MetricsReport,
    partitions: Partition | None,
    config: Any = None,
    *,
    summary: Mapping[str, int] | None = None,
    monthly: Mapping[str, Any] | None = None,
    topics: Sequence[Mapping[str, Any]] = (),
    names: Mapping[str, str] | None = None,
    k: int = 10,
) -> tuple[str, dict]:
    """Return ``(text, document)``; text rounds for display, the document does not."""
    names = names or {}
    msgs = metrics.messages_sent
    doc: dict[str, Any] = {}
    lines: list[str] = []

    if summary is not None:
        lines.append(
            f"Corpus: {summary['threads']} threads, {summary['messages']} messages, "
            f"{summary['authors']} authors"
        )
        doc["summary"] = dict(summary)
    if monthly is not None:
        lines.append(
            f"Messages/month: mean {format_ratio(monthly.get('mean'), 1)}, "
            f"peak {monthly.get('peak') or 'n/a'}"
        )
        doc["monthly"] = dict(monthly)
    lines.append("")

    lines.append(f"Graph: {metrics.node_count} nodes, {metrics.edge_count} edges")
    lines.append(f"Reciprocity SR:  {format_ratio(metrics.sr)}")
    lines.append(f"Reciprocity GLR: {format_ratio(metrics.glr)}")
    for key, note in metrics.notes.items():
        lines.append(f"  ({key}: {note})")
    doc["reciprocity"] = {"sr": metrics.sr, "glr": metrics.glr, "notes": dict(metrics.notes)}
    lines.append("")

    ins = rank_nodes(metrics.in_degree, msgs, k)
    outs = rank_nodes(metrics.out_degree, msgs, k)
    bcs = rank_nodes(metrics.betweenness, msgs, k)
    share = metrics.message_share
    lines += _table("In-degree ranking", ("rank", "actor", "in-degree"),
                    [(r.rank, names.get(r.node, r.node), r.value) for r in ins])
    lines.append("")
    lines += _table("Out-degree ranking", ("rank", "actor", "out-degree", "messages", "share"),
                    [(r.rank, names.get(r.node, r.node), r.value, r.messages,
                      format_percent(share.get(r.node))) for r in outs])
    lines.append(f"Top-10 out-degree actors send {format_percent(metrics.top10_share)} of messages")
    lines.append("")
    lines += _table("Betweenness ranking", ("rank", "actor", "betweenness"),
                    [(r.rank, names.get(r.node, r.node), f"{r.value:.3f}") for r in bcs])
    lines.append("")
    lines += _table("Power brokers", ("multiplier", "count", "proportion"),
                    [(f"{t.multiplier:g}x mean", t.count,
                      "degenerate (mean 0)" if t.degenerate else format_percent(t.proportion))
                     for t in metrics.bc_thresholds])
    doc["rankings"] = {
        "in_degree": [r.__dict__ for r in ins],
        "out_degree": [dict(r.__dict__, share=share.get(r.node)) for r in outs],
        "betweenness": [r.__dict__ for r in bcs],
    }
    doc["top10_share"] = metrics.top10_share
    doc["bc_thresholds"] = [t.__dict__ for t in metrics.bc_thresholds]
    lines.append("")

    section, doc["communities"] = _community_section("Communities", partitions, names)
    lines += section

    doc["topics"] = []
    for t in topics:
        lines.append("")
        lines.append(
            f"Topic '{t['query']}': {t['threads']} threads, {t['nodes']} actors, "
            f"main actor {names.get(t['main_actor'], t['main_actor']) if t.get('main_actor') else 'n/a'}, "
            f"ego network {t.get('ego_nodes', 0)} actors within {t.get('radius')} hops"
        )
        part = t.get("partition")
        section, comm = _community_section("  Sub-communities", part, names)
        lines += section
        entry = {k2: v for k2, v in t.items() if k2 != "partition"}
        entry["communities"] = comm
        doc["topics"].append(entry)

    if config is not None and hasattr(config, "to_dict"):
        doc["config"] = config.to_dict()
    return "\n".join(lines).rstrip() + "\n", doc
