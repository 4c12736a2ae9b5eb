"""End-to-end pipeline with file-based stage caching.

Stages run in a fixed order.  A stage is skipped when its stored dataset
is intact and was produced from the current upstream digests and
parameters, so deleting any output recomputes only from that point on.
"""

from __future__ import annotations

import calendar
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from filelock import FileLock, Timeout

from . import report as rpt
from .community import Partition, subcommunities
from .errors import ConfigError, DataError, ListSNAError, StageError
from .graph import CommGraph, build_graph, graphml_bytes, to_dot
from .identity import AliasMap, format_rules, resolve_identities
from .issues import Issue
from .mbox import Message, ingest, monthly_counts
from .metrics import BCThreshold, MetricsReport, compute_metrics, degree_histogram, ego_network
from .stages import (
    StageDataset,
    atomic_write,
    encode_records,
    is_fresh,
    read_stage,
    sha256_bytes,
    sha256_file,
    write_stage,
)
from .threads import Thread, build_threads, corpus_summary, filter_threads
from .topics import TopicQuery, main_actor, select_threads, topic_graph

log = logging.getLogger(__name__)

OUTPUT_ENV = "LISTSNA_OUTPUT_DIR"
STAGES = ("ingest", "thread", "identify", "graph", "metrics", "communities", "topic", "report")
INCOMPLETE_MARKER = "INCOMPLETE"


def parse_utc_date(text: str) -> int:
    """ISO date or datetime (naive means UTC) to epoch seconds."""
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"invalid date {text!r}; expected ISO format like 2008-08-01") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return calendar.timegm(dt.utctimetuple())


@dataclass
class PipelineConfig:
    archive_paths: list[Path] = field(default_factory=list)
    output_dir: Path = Path("listsna-out")
    alias_map_path: Path | None = None
    min_thread_size: int = 2
    allow_small_threads: bool = False
    date_range: tuple[int, int] | None = None
    topic_queries: list[TopicQuery] = field(default_factory=list)
    ego_radius: int = 3
    bc_multipliers: list[float] = field(default_factory=lambda: [10.0, 20.0, 40.0])
    seed: int = 0
    community_level: int | None = None
    suggestion_threshold: int = 2
    top_k: int = 10
    workers: int = 1

    def validate(self, require_archives: bool = True) -> None:
        if require_archives and not self.archive_paths:
            raise ConfigError("no archives given")
        for p in self.archive_paths:
            if not Path(p).is_file():
                raise ConfigError(f"archive not found: {p}")
        if self.alias_map_path is not None and not Path(self.alias_map_path).is_file():
            raise ConfigError(f"alias file not found: {self.alias_map_path}")
        if self.min_thread_size < 1:
            raise ConfigError("min_thread_size must be at least 1")
        if self.min_thread_size < 2 and not self.allow_small_threads:
            raise ConfigError("min_thread_size below 2 requires --allow-small-threads")
        if self.date_range is not None and not self.date_range[0] < self.date_range[1]:
            raise ConfigError("date range start must be before its end")
        if self.ego_radius < 0:
            raise ConfigError("ego radius must be non-negative")
        if any(m < 0 for m in self.bc_multipliers):
            raise ConfigError("BC multipliers must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def to_dict(self) -> dict:
        return {
            "archive_paths": [str(p) for p in self.archive_paths],
            "alias_map_path": str(self.alias_map_path) if self.alias_map_path else None,
            "min_thread_size": self.min_thread_size,
            "date_range": list(self.date_range) if self.date_range else None,
            "topic_queries": [
                {"pattern": q.pattern, "regex": q.regex, "match_scope": q.match_scope}
                for q in self.topic_queries
            ],
            "ego_radius": self.ego_radius,
            "bc_multipliers": list(self.bc_multipliers),
            "seed": self.seed,
            "community_level": self.community_level,
            "suggestion_threshold": self.suggestion_threshold,
            "top_k": self.top_k,
        }


@dataclass
class PipelineResult:
    summary: dict[str, int] = field(default_factory=dict)
    digests: dict[str, str] = field(default_factory=dict)
    ran: list[str] = field(default_factory=list)
    reused: list[str] = field(default_factory=list)
    report_text: str = ""


def sample_archive() -> Path:
    return Path(str(resources.files("listsna") / "data" / "sample.mbox"))


def sample_aliases() -> Path:
    return Path(str(resources.files("listsna") / "data" / "sample_aliases.txt"))


class _Runner:
    def __init__(self, config: PipelineConfig, result: PipelineResult):
        self.cfg = config
        self.out = Path(config.output_dir)
        self.result = result
        self._cache: dict[str, StageDataset] = {}

    # -- helpers --

    def stage(self, name: str, dataset: str, inputs: dict, params: dict,
              compute: Callable[[], tuple[list, dict[str, bytes]]]) -> StageDataset:
        if is_fresh(self.out, dataset, inputs, params):
            ds = read_stage(self.out, dataset)
            self.result.reused.append(name)
            log.info("stage %s: up to date", name)
        else:
            log.info("stage %s: computing", name)
            try:
                records, files = compute()
            except ListSNAError:
                raise
            except Exception as exc:  # internal failure, tagged with the stage
                raise StageError(name, exc) from exc
            artifacts = {}
            for fname, data in sorted(files.items()):
                atomic_write(self.out / fname, data)
                artifacts[fname] = sha256_bytes(data)
            ds = write_stage(self.out, StageDataset(dataset, records, inputs=inputs,
                                                    params=params, artifacts=artifacts))
            self.result.ran.append(name)
        self.result.digests[dataset] = ds.digest
        self._cache[dataset] = ds
        return ds

    def messages(self) -> list[Message]:
        return [Message.from_dict(r) for r in self._cache["messages"].records]

    def message_index(self) -> dict[str, Message]:
        return {m.msg_id: m for m in self.messages()}

    def threads(self) -> list[Thread]:
        index = self.message_index()
        return [Thread.from_dict(r, index) for r in self._cache["threads"].records]

    def identity_map(self) -> dict[str, str]:
        return {mid: r["canonical_id"] for r in self._cache["identities"].records for mid in r["msg_ids"]}

    def display_names(self) -> dict[str, str]:
        return {r["canonical_id"]: r["display_name"] for r in self._cache["identities"].records}

    def graph(self) -> CommGraph:
        return CommGraph.from_records(self._cache["graph"].records)

    # -- stages --

    def ingest(self) -> None:
        cfg = self.cfg
        if cfg.archive_paths:
            inputs = {f"archive:{i}:{Path(p).name}": sha256_file(p) for i, p in enumerate(cfg.archive_paths)}
        else:
            ds = read_stage(self.out, "messages")
            inputs = ds.inputs
        params = {"date_range": list(cfg.date_range) if cfg.date_range else None}

        def compute():
            if not cfg.archive_paths:
                raise ConfigError("messages stage missing or stale and no archives given")
            issues: list[Issue] = []
            msgs = ingest(cfg.archive_paths, issues)
            if cfg.date_range is not None:
                lo, hi = cfg.date_range
                kept = []
                for m in msgs:
                    if lo <= m.timestamp_utc < hi:
                        kept.append(m)
                    else:
                        issues.append(Issue("ingest", "outside-date-range", m.msg_id, str(m.timestamp_utc)))
                msgs = kept
            warnings = encode_records(i.to_dict() for i in issues)
            return [m.to_dict() for m in msgs], {"ingest.warnings.jsonl": warnings}

        self.stage("ingest", "messages", inputs, params, compute)

    def thread(self) -> None:
        cfg = self.cfg
        inputs = {"messages": self.result.digests["messages"]}
        params = {"min_thread_size": cfg.min_thread_size}

        def compute():
            issues: list[Issue] = []
            built = build_threads(self.messages(), issues)
            kept = filter_threads(built, cfg.min_thread_size)
            issues.append(Issue("thread", "filter", f"min_size={cfg.min_thread_size}",
                                f"kept {len(kept)} of {len(built)} threads"))
            warnings = encode_records(i.to_dict() for i in issues)
            return [t.to_dict() for t in kept], {"thread.warnings.jsonl": warnings}

        self.stage("thread", "threads", inputs, params, compute)

    def identify(self) -> None:
        cfg = self.cfg
        inputs = {"messages": self.result.digests["messages"]}
        if cfg.alias_map_path is not None:
            inputs["aliases"] = sha256_file(cfg.alias_map_path)
        params = {"threshold": cfg.suggestion_threshold}

        def compute():
            aliases = AliasMap.load(cfg.alias_map_path) if cfg.alias_map_path else AliasMap()
            res = resolve_identities(self.messages(), aliases, cfg.suggestion_threshold)
            msg_ids: dict[str, list[str]] = {}
            for mid, cid in res.by_msg_id.items():
                msg_ids.setdefault(cid, []).append(mid)
            records = [dict(i.to_dict(), msg_ids=sorted(msg_ids.get(i.canonical_id, []))) for i in res.identities]
            header = "# Suggested merges: review, then append accepted lines to the alias file.\n"
            suggestions = header + format_rules(res.suggestion_rules())
            return records, {"alias_suggestions.txt": suggestions.encode("utf-8")}

        self.stage("identify", "identities", inputs, params, compute)

    def build_graph(self) -> None:
        inputs = {"threads": self.result.digests["threads"], "identities": self.result.digests["identities"]}

        def compute():
            g = build_graph(self.threads(), self.identity_map(), self.display_names())
            return g.to_records(), {"graph.graphml": graphml_bytes(g), "graph.dot": to_dot(g).encode("utf-8")}

        self.stage("graph", "graph", inputs, params={}, compute=compute)

    def metrics(self) -> None:
        cfg = self.cfg
        inputs = {"graph": self.result.digests["graph"], "messages": self.result.digests["messages"],
                  "threads": self.result.digests["threads"], "identities": self.result.digests["identities"]}
        params = {"bc_multipliers": list(cfg.bc_multipliers), "top_k": cfg.top_k}

        def compute():
            g = self.graph()
            m = compute_metrics(g, cfg.bc_multipliers, workers=cfg.workers)
            monthly = monthly_counts(self.messages())
            summary = corpus_summary(self.threads(), self.identity_map())
            names = self.display_names()
            record = {
                "summary": {"threads": summary.threads, "messages": summary.messages, "authors": summary.authors},
                "monthly": {
                    "mean": monthly.mean,
                    "peak": f"{monthly.peak[0]:04d}-{monthly.peak[1]:02d}" if monthly.peak else None,
                    "counts": {f"{y:04d}-{mo:02d}": c for (y, mo), c in monthly.counts.items()},
                },
                "metrics": m.to_dict(),
            }
            files = {
                "metrics.json": (json.dumps(record, indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
                "rankings_in_degree.csv": rpt.ranking_csv(m.in_degree, m.messages_sent, names).encode(),
                "rankings_out_degree.csv": rpt.ranking_csv(m.out_degree, m.messages_sent, names).encode(),
                "rankings_betweenness.csv": rpt.ranking_csv(m.betweenness, m.messages_sent, names).encode(),
                "monthly_counts.csv": rpt.monthly_csv(monthly.counts).encode(),
                "degree_histogram.csv": rpt.histogram_csv(degree_histogram(g)).encode(),
            }
            return [record], files

        self.stage("metrics", "metrics", inputs, params, compute)

    def communities(self) -> None:
        cfg = self.cfg
        inputs = {"graph": self.result.digests["graph"]}
        params = {"seed": cfg.seed, "level": cfg.community_level}

        def compute():
            g = self.graph()
            part = subcommunities(g, seed=cfg.seed, level=cfg.community_level)
            files = {
                "partition.csv": rpt.partition_csv(part).encode(),
                "partition_levels.json": (json.dumps(part.levels, indent=2, sort_keys=True) + "\n").encode(),
                "graph_communities.graphml": graphml_bytes(g, part.assignment),
            }
            return [part.to_dict()], files

        self.stage("communities", "communities", inputs, params, compute)

    def topics(self) -> None:
        cfg = self.cfg
        inputs = {"threads": self.result.digests["threads"], "identities": self.result.digests["identities"]}
        params = {"queries": cfg.to_dict()["topic_queries"], "radius": cfg.ego_radius, "seed": cfg.seed,
                  "level": cfg.community_level}

        def compute():
            threads, ids, names = self.threads(), self.identity_map(), self.display_names()
            records, files = [], {}
            for q in cfg.topic_queries:
                tg = topic_graph(threads, q, ids, names)
                n_threads = len(select_threads(threads, q))
                rec: dict[str, Any] = {
                    "query": q.pattern, "regex": q.regex, "match_scope": q.match_scope,
                    "threads": n_threads, "nodes": len(tg.nodes), "edges": len(tg.edges),
                    "main_actor": None, "radius": cfg.ego_radius, "ego_nodes": 0, "partition": None,
                }
                base = f"topics/{q.slug}"
                if tg.nodes:
                    actor = main_actor(tg)
                    ego = ego_network(tg, actor, cfg.ego_radius)
                    part = subcommunities(ego, seed=cfg.seed, level=cfg.community_level)
                    rec.update(main_actor=actor, ego_nodes=len(ego.nodes), partition=part.to_dict())
                    files[f"{base}/topic_graph.graphml"] = graphml_bytes(tg)
                    files[f"{base}/ego.graphml"] = graphml_bytes(ego, part.assignment)
                    files[f"{base}/ego.dot"] = to_dot(ego, part.assignment).encode()
                    files[f"{base}/partition.csv"] = rpt.partition_csv(part).encode()
                records.append(rec)
            return records, files

        self.stage("topic", "topics", inputs, params, compute)

    def report(self) -> None:
        cfg = self.cfg
        inputs = {s: self.result.digests[s] for s in ("metrics", "communities", "topics", "identities")}
        params = {"top_k": cfg.top_k}

        def compute():
            text, doc = self._render()
            files = {
                "report.txt": text.encode("utf-8"),
                "report.json": (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
            }
            return [doc], files

        ds = self.stage("report", "report", inputs, params, compute)
        self.result.report_text = (self.out / "report.txt").read_text(encoding="utf-8")
        self.result.summary = dict(ds.records[0].get("summary", {}))

    def _render(self) -> tuple[str, dict]:
        rec = self._cache["metrics"].records[0]
        m = rec["metrics"]
        metrics = MetricsReport(**{**m, "bc_thresholds": [BCThreshold(**t) for t in m["bc_thresholds"]]})
        part = _partition_from(self._cache["communities"].records[0])
        topics = []
        for t in self._cache["topics"].records:
            t = dict(t)
            t["partition"] = _partition_from(t["partition"]) if t["partition"] else None
            topics.append(t)
        return rpt.render_report(
            metrics, part, self.cfg, summary=rec["summary"], monthly=rec["monthly"],
            topics=topics, names=self.display_names(), k=self.cfg.top_k,
        )


def _partition_from(d: dict) -> Partition:
    return Partition(dict(d["assignment"]), d["modularity"], d["levels"], d["level_modularity"], d["members"])


def run_pipeline(config: PipelineConfig, until: str = "report", require_archives: bool = True) -> PipelineResult:
    """Run every stage up to and including ``until``."""
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}")
    config.validate(require_archives=require_archives)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult()
    runner = _Runner(config, result)
    steps = {
        "ingest": runner.ingest, "thread": runner.thread, "identify": runner.identify,
        "graph": runner.build_graph, "metrics": runner.metrics, "communities": runner.communities,
        "topic": runner.topics, "report": runner.report,
    }
    lock = FileLock(str(out / ".lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise ConfigError(f"another run holds the lock on {out}") from None
    marker = out / INCOMPLETE_MARKER
    try:
        for name in STAGES:
            atomic_write(marker, f"running stage {name}\n".encode())
            try:
                steps[name]()
            except StageError:
                raise
            except (ConfigError, DataError) as exc:
                exc.stage = name  # type: ignore[attr-defined]
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
            if name == until:
                break
        marker.unlink()
    except BaseException as exc:
        stage = getattr(exc, "stage", "unknown")
        atomic_write(marker, f"failed in stage {stage}: {exc}\noutputs in this directory are incomplete\n".encode())
        raise
    finally:
        lock.release()
    return result


def default_output_dir(cli_value: str | None) -> Path:
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get(OUTPUT_ENV, "listsna-out"))
