import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from listsna.errors import ConfigError
from listsna.graph import CommGraph, build_graph
from listsna.metrics import ego_network
from listsna.threads import build_threads
from listsna.topics import TopicQuery, load_queries, main_actor, select_threads, topic_graph

from conftest import digraphs, make_msg


def corpus():
    """Five threads; three rooted on sledgehammer subjects, one renamed mid-thread."""
    layout = [
        ("s1", "Sledgehammer fails on lemma", ["ann", "bob", "ann"]),
        ("s2", "Re: sledgehammer timeout", ["cat", "ann"]),
        ("s3", "[prover-users] Using SLEDGEHAMMER with locales", ["dan", "bob", "cat"]),
        ("h1", "homotopy type theory", ["vlad", "ed", "ed", "mo", "ed"]),
        ("p1", "parse translations", ["bob", "cat"]),
    ]
    msgs = []
    ts = 0
    for tid, subject, authors in layout:
        for i, a in enumerate(authors):
            ts += 1
            subj = subject if i == 0 else "Re: " + subject
            if tid == "p1" and i == 1:
                subj = "Re: sledgehammer (was: parse translations)"
            msgs.append(make_msg(f"{tid}.{i}", f"{a}@x", ts, subj, refs=[f"{tid}.{j}" for j in range(i)]))
    return build_threads(msgs)


def roots(threads):
    return sorted(t.root.msg_id for t in threads)


def test_select_root_scope():
    threads = corpus()
    assert roots(select_threads(threads, TopicQuery("sledgehammer"))) == ["s1.0", "s2.0", "s3.0"]


def test_select_any_scope_includes_renamed():
    threads = corpus()
    hits = select_threads(threads, TopicQuery("sledgehammer", match_scope="any"))
    assert roots(hits) == ["p1.0", "s1.0", "s2.0", "s3.0"]
    assert all(h.size in (2, 3) for h in hits)  # whole threads


def test_no_match():
    assert select_threads(corpus(), TopicQuery("nonexistent")) == []
    g = topic_graph(corpus(), TopicQuery("nonexistent"))
    assert g.nodes == frozenset() and g.edges == {}


def test_single_homotopy_thread():
    (t,) = select_threads(corpus(), TopicQuery("homotopy"))
    assert t.size == 5


def test_regex_query():
    q = TopicQuery.parse("re:^(sledge|homo)")
    # s3 mentions sledgehammer mid-subject, so the anchored pattern skips it
    assert roots(select_threads(corpus(), q)) == ["h1.0", "s1.0", "s2.0"]


def test_invalid_regex_reports_position():
    with pytest.raises(ConfigError) as exc:
        TopicQuery("abc(", regex=True)
    assert "position 3" in str(exc.value)


def test_empty_pattern_and_bad_scope():
    with pytest.raises(ConfigError):
        TopicQuery("")
    with pytest.raises(ConfigError):
        TopicQuery("x", match_scope="body")


def test_topic_graph_matches_manual_selection():
    threads = corpus()
    manual = [t for t in threads if t.root.msg_id in {"s1.0", "s2.0", "s3.0"}]
    assert topic_graph(threads, TopicQuery("sledgehammer")) == build_graph(manual)


def test_small_topic_graph():
    threads = build_threads([make_msg("a", "A", 1, "zeta"), make_msg("b", "B", 2, "Re: zeta", refs=["a"])])
    g = topic_graph(threads, TopicQuery("zeta"))
    assert len(g.nodes) == 2 and g.edges == {("B", "A"): 1}


def test_match_all_regex_equals_full_graph():
    threads = corpus()
    assert topic_graph(threads, TopicQuery(".*", regex=True)) == build_graph(threads)


def test_main_actor_examples():
    star = CommGraph.from_edges([("a", "c"), ("b", "c"), ("c", "d")])
    assert main_actor(star) == "c"
    tied = CommGraph.from_edges({("A", "B"): 5, ("B", "A"): 1})
    assert main_actor(tied) == "A"
    with pytest.raises(ValueError):
        main_actor(CommGraph(frozenset(), {}, {}))


def test_originator_outranks_expert():
    # vlad opens and is answered by everyone; the expert "ed" posts most but talks to fewer people
    msgs = [make_msg("h0", "vlad@x", 0, "homotopy")]
    for i, who in enumerate(["ed", "mo", "kim", "lu"], 1):
        msgs.append(make_msg(f"h{i}", f"{who}@x", i, "Re: homotopy", irt="h0"))
    msgs.append(make_msg("h5", "vlad@x", 5, "Re: homotopy", irt="h1"))
    msgs += [make_msg(f"h{i}", "ed@x", i, "Re: homotopy", irt="h5") for i in range(6, 10)]
    g = topic_graph(build_threads(msgs), TopicQuery("homotopy"))
    assert g.node_message_counts["ed@x"] > g.node_message_counts["vlad@x"]
    assert main_actor(g) == "vlad@x"
    assert ego_network(g, main_actor(g), 3).nodes == g.nodes


def test_load_queries(tmp_path):
    p = tmp_path / "q.txt"
    p.write_text("# topics\nsledgehammer\n\nre:homo.*\n")
    qs = load_queries(p)
    assert [(q.pattern, q.regex) for q in qs] == [("sledgehammer", False), ("homo.*", True)]
    assert qs[0].slug == "sledgehammer"


@given(st.sampled_from(["sledge", "homo", "parse", "lemma", "x"]), st.sampled_from(["hammer", "topy", "trans"]))
@settings(max_examples=30, deadline=None)
def test_select_monotone_under_union(a, b):
    threads = corpus()
    single = roots(select_threads(threads, TopicQuery(a, regex=True)))
    union = roots(select_threads(threads, TopicQuery(f"{a}|{b}", regex=True)))
    assert set(single) <= set(union)


@given(digraphs(min_nodes=1), st.integers(2, 9))
@settings(max_examples=80, deadline=None)
def test_main_actor_weight_scaling_invariant(g, factor):
    scaled = g.reweighted(lambda e, w: w * factor, lambda n, c: c * factor)
    assert main_actor(scaled) == main_actor(g)
