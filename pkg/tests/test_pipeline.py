import json
import time
from pathlib import Path

import pytest
from filelock import FileLock

from listsna.errors import ConfigError, DataError, StageError
from listsna.pipeline import INCOMPLETE_MARKER, PipelineConfig, parse_utc_date, run_pipeline, sample_aliases, sample_archive
from listsna.stages import read_meta
from listsna.topics import TopicQuery

STAGE_FILES = ["messages", "threads", "identities", "graph", "metrics", "communities", "topics", "report"]


def config(out, **kw):
    base = dict(
        archive_paths=[sample_archive()],
        alias_map_path=sample_aliases(),
        output_dir=out,
        topic_queries=[TopicQuery("parse translations"), TopicQuery("build failure")],
    )
    base.update(kw)
    return PipelineConfig(**base)


def digests(out):
    return {s: read_meta(out, s)["digest"] for s in STAGE_FILES}


def test_sample_counts_and_artifacts(tmp_path):
    res = run_pipeline(config(tmp_path))
    assert res.summary == {"threads": 3, "messages": 12, "authors": 5}
    for name in [
        "messages.jsonl", "ingest.warnings.jsonl", "threads.jsonl", "identities.jsonl", "alias_suggestions.txt",
        "graph.graphml", "graph.dot", "metrics.json", "rankings_in_degree.csv", "rankings_out_degree.csv",
        "rankings_betweenness.csv", "monthly_counts.csv", "degree_histogram.csv", "partition.csv",
        "partition_levels.json", "report.txt", "report.json",
        "topics/parse-translations/ego.graphml", "topics/build-failure/ego.dot",
    ]:
        assert (tmp_path / name).exists(), name
    assert not (tmp_path / INCOMPLETE_MARKER).exists()
    messages = [json.loads(l) for l in (tmp_path / "messages.jsonl").read_text().splitlines()]
    assert len(messages) == 14
    assert set(messages[0]) == {"msg_id", "sender_name", "sender_email", "timestamp_utc", "subject",
                                "normalized_subject", "in_reply_to", "references", "body_text"}
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["summary"] == {"threads": 3, "messages": 12, "authors": 5}
    assert "Corpus: 3 threads, 12 messages, 5 authors" in res.report_text


def test_sample_graph_hand_check(tmp_path):
    run_pipeline(config(tmp_path), until="graph")
    records = [json.loads(l) for l in (tmp_path / "graph.jsonl").read_text().splitlines()]
    edges = {(r["src"], r["dst"]): r["weight"] for r in records if r["type"] == "edge"}
    # derived by hand from the bundled archive with its alias file applied
    a, b, c, d, j = "alice@example.org", "bob@example.org", "carol@example.org", "dave@example.net", "juergen@example.de"
    assert edges == {(b, a): 1, (j, b): 1, (a, j): 1, (c, a): 1, (a, d): 1, (d, a): 1, (b, d): 1, (j, c): 1, (b, c): 1}


def test_without_aliases_there_are_six_authors(tmp_path):
    res = run_pipeline(config(tmp_path, alias_map_path=None))
    assert res.summary["authors"] == 6


def test_deterministic_digests(tmp_path):
    run_pipeline(config(tmp_path / "one"))
    run_pipeline(config(tmp_path / "two"))
    assert digests(tmp_path / "one") == digests(tmp_path / "two")
    for p in sorted((tmp_path / "one").rglob("*")):
        if p.is_file() and p.name != ".lock":
            assert p.read_bytes() == (tmp_path / "two" / p.relative_to(tmp_path / "one")).read_bytes(), p


def test_runtime_under_ten_seconds(tmp_path):
    start = time.perf_counter()
    run_pipeline(config(tmp_path))
    assert time.perf_counter() - start < 10


def test_empty_archive_list_is_config_error(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(ConfigError):
        run_pipeline(config(out, archive_paths=[]))
    assert not out.exists()


@pytest.mark.parametrize("victim,expected", [
    ("graph.jsonl", ["graph"]),
    ("metrics.json", ["metrics"]),
    ("threads.meta.json", ["thread"]),
    ("report.txt", ["report"]),
])
def test_only_earliest_missing_stage_recomputed(tmp_path, victim, expected):
    run_pipeline(config(tmp_path))
    before = digests(tmp_path)
    (tmp_path / victim).unlink()
    res = run_pipeline(config(tmp_path))
    # unchanged digests mean every later stage is found fresh again
    assert res.ran == expected
    assert digests(tmp_path) == before


def test_param_change_recomputes_downstream_only(tmp_path):
    run_pipeline(config(tmp_path))
    res = run_pipeline(config(tmp_path, seed=5))
    assert res.ran[0] == "communities"
    assert "graph" in res.reused and "metrics" in res.reused


def test_tampered_stage_is_recomputed(tmp_path):
    run_pipeline(config(tmp_path))
    p = tmp_path / "threads.jsonl"
    p.write_text(p.read_text() + "{}\n")
    res = run_pipeline(config(tmp_path))
    assert res.ran == ["thread"]


def test_later_stage_without_archives_reuses_messages(tmp_path):
    run_pipeline(config(tmp_path), until="ingest")
    res = run_pipeline(config(tmp_path, archive_paths=[]), until="graph", require_archives=False)
    assert res.reused == ["ingest"] and res.ran == ["thread", "identify", "graph"]


def test_later_stage_without_anything_is_data_error(tmp_path):
    with pytest.raises(DataError):
        run_pipeline(config(tmp_path, archive_paths=[]), until="graph", require_archives=False)


def test_failure_marks_outputs_incomplete(tmp_path):
    bad = tmp_path / "aliases.txt"
    bad.write_text("*@example.org, X\nalice@*, Y\n")
    out = tmp_path / "out"
    with pytest.raises(ConfigError) as exc:
        run_pipeline(config(out, alias_map_path=bad))
    assert exc.value.stage == "identify"
    marker = (out / INCOMPLETE_MARKER).read_text()
    assert "identify" in marker
    run_pipeline(config(out))
    assert not (out / INCOMPLETE_MARKER).exists()


def test_internal_error_wrapped_with_stage(tmp_path, monkeypatch):
    import listsna.pipeline as pl

    def boom(*a, **k):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(pl, "compute_metrics", boom)
    with pytest.raises(StageError) as exc:
        run_pipeline(config(tmp_path))
    assert exc.value.stage == "metrics"
    assert "metrics" in (tmp_path / INCOMPLETE_MARKER).read_text()


def test_bad_archive_is_data_error(tmp_path):
    junk = tmp_path / "junk.mbox"
    junk.write_bytes(b"not a mailbox\n")
    with pytest.raises(DataError) as exc:
        run_pipeline(config(tmp_path / "out", archive_paths=[junk]))
    assert exc.value.stage == "ingest"


def test_lock_prevents_concurrent_writer(tmp_path):
    tmp_path.mkdir(exist_ok=True)
    with FileLock(str(tmp_path / ".lock")):
        with pytest.raises(ConfigError, match="lock"):
            run_pipeline(config(tmp_path))


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path, min_thread_size=1))
    run_pipeline(config(tmp_path, min_thread_size=1, allow_small_threads=True), until="thread")
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path, date_range=(10, 5)))
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path, archive_paths=[tmp_path / "missing.mbox"]))
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path), until="nonsense")


def test_date_range_filter(tmp_path):
    lo, hi = parse_utc_date("2009-03-01"), parse_utc_date("2009-04-01")
    res = run_pipeline(config(tmp_path, date_range=(lo, hi)))
    msgs = [json.loads(l) for l in (tmp_path / "messages.jsonl").read_text().splitlines()]
    assert all(lo <= m["timestamp_utc"] < hi for m in msgs)
    assert len(msgs) == 9
    warnings = (tmp_path / "ingest.warnings.jsonl").read_text()
    assert warnings.count("outside-date-range") == 5
    assert res.summary == {"threads": 2, "messages": 9, "authors": 5}


def test_parse_utc_date():
    assert parse_utc_date("1970-01-02") == 86400
    assert parse_utc_date("1970-01-01T02:00:00+02:00") == 0
    with pytest.raises(ConfigError):
        parse_utc_date("yesterday")


def test_topic_outputs(tmp_path):
    run_pipeline(config(tmp_path))
    topics = [json.loads(l) for l in (tmp_path / "topics.jsonl").read_text().splitlines()]
    pt = topics[0]
    assert (pt["query"], pt["threads"], pt["nodes"], pt["main_actor"]) == ("parse translations", 1, 4, "alice@example.org")
    assert pt["ego_nodes"] == 4
    assert "Topic 'parse translations'" in (tmp_path / "report.txt").read_text()
