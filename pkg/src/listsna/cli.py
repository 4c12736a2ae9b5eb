"""Command-line entry point: ``listsna <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DataError, StageError
from .pipeline import (
    OUTPUT_ENV,
    STAGES,
    PipelineConfig,
    default_output_dir,
    parse_utc_date,
    run_pipeline,
    sample_aliases,
    sample_archive,
)
from .topics import ANY_SCOPE, ROOT_SCOPE, TopicQuery, load_queries

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("listsna")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for data errors here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("archives", nargs="*", type=Path, help="MBox archive files")
    p.add_argument("-o", "--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or ./listsna-out)")
    p.add_argument("--sample", action="store_true", help="use the bundled synthetic corpus and alias file")
    p.add_argument("--aliases", type=Path, help="alias map file")
    p.add_argument("--min-thread-size", type=int, default=2)
    p.add_argument("--allow-small-threads", action="store_true",
                   help="permit --min-thread-size below 2")
    p.add_argument("--since", help="keep messages at or after this UTC date (ISO format)")
    p.add_argument("--until", dest="until_date", help="keep messages before this UTC date (ISO format)")
    p.add_argument("--topic", action="append", default=[], metavar="QUERY",
                   help="subject substring, or re:<regex>; repeatable")
    p.add_argument("--topics-file", type=Path, help="file with one topic query per line")
    p.add_argument("--topic-scope", choices=(ROOT_SCOPE, ANY_SCOPE), default=ROOT_SCOPE)
    p.add_argument("--ego-radius", type=int, default=3)
    p.add_argument("--bc-multipliers", default="10,20,40", help="comma-separated list")
    p.add_argument("--seed", type=int, default=0, help="Louvain visit-order seed")
    p.add_argument("--level", type=int, help="hierarchy level to report (default: final)")
    p.add_argument("--suggest-threshold", type=int, default=2,
                   help="maximum name edit distance for merge suggestions")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--workers", type=int, default=1, help="processes for betweenness")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="listsna", description="Mailing-list social network analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "parse archives into messages.jsonl",
        "thread": "reconstruct threads",
        "identify": "resolve author identities",
        "graph": "build and export the communication graph",
        "metrics": "reciprocity, degree, betweenness and message shares",
        "communities": "Louvain communities of the whole graph",
        "topic": "topic networks, ego networks and their sub-communities",
        "report": "render report.txt and report.json",
        "run": "full pipeline",
    }
    for name in (*STAGES, "run"):
        _add_common(sub.add_parser(name, help=helps[name]))
    return parser


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"invalid multiplier list {text!r}") from None


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    archives = list(args.archives)
    aliases = args.aliases
    if args.sample:
        archives = archives or [sample_archive()]
        aliases = aliases or sample_aliases()
    queries = [TopicQuery.parse(q, args.topic_scope) for q in args.topic]
    if args.topics_file is not None:
        if not args.topics_file.is_file():
            raise ConfigError(f"topics file not found: {args.topics_file}")
        queries += load_queries(args.topics_file, args.topic_scope)
    if args.sample and not queries:
        queries = [TopicQuery("parse translations")]
    date_range = None
    if args.since or args.until_date:
        lo = parse_utc_date(args.since) if args.since else -(2**63)
        hi = parse_utc_date(args.until_date) if args.until_date else 2**63 - 1
        date_range = (lo, hi)
    return PipelineConfig(
        archive_paths=archives,
        output_dir=default_output_dir(args.output_dir),
        alias_map_path=aliases,
        min_thread_size=args.min_thread_size,
        allow_small_threads=args.allow_small_threads,
        date_range=date_range,
        topic_queries=queries,
        ego_radius=args.ego_radius,
        bc_multipliers=_floats(args.bc_multipliers),
        seed=args.seed,
        community_level=args.level,
        suggestion_threshold=args.suggest_threshold,
        top_k=args.top_k,
        workers=args.workers,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    until = "report" if args.command == "run" else args.command
    try:
        config = config_from_args(args)
        # Later stages may run from an existing output directory without archives.
        result = run_pipeline(config, until=until, require_archives=until == "ingest" or args.command == "run")
    except ConfigError as exc:
        print(f"listsna: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        stage = getattr(exc, "stage", None)
        where = f" in stage '{stage}'" if stage else ""
        print(f"listsna: data error{where}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"listsna: internal error: {exc}", file=sys.stderr)
        if args.verbose:
            log.exception("traceback")
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"listsna: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    out = config.output_dir
    if until == "report":
        sys.stdout.write(result.report_text)
    else:
        print(f"stage '{until}' complete in {out} "
              f"(computed: {', '.join(result.ran) or 'none'}; reused: {', '.join(result.reused) or 'none'})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
