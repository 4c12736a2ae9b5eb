import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from listsna.errors import ConfigError, DataIntegrityError
from listsna.issues import Issue
from listsna.threads import Thread, build_threads, corpus_summary, filter_threads

from conftest import make_msg
from jwz_fixture import EXPECTED_FOREST, fixture_messages, shape


def sizes(threads):
    return [t.size for t in threads]


def test_fixture_forest_exact():
    issues: list[Issue] = []
    threads = build_threads(fixture_messages(), issues)
    assert [shape(t.root) for t in threads] == EXPECTED_FOREST
    assert sum(t.size for t in threads) == 20
    assert [i.kind for i in issues] == ["reference-cycle"]


def test_fixture_order_independent():
    msgs = fixture_messages()
    rng = random.Random(7)
    for _ in range(20):
        rng.shuffle(msgs)
        assert [shape(t.root) for t in build_threads(msgs)] == EXPECTED_FOREST


def test_fixture_thread_attributes():
    threads = build_threads(fixture_messages())
    beta = threads[1]
    assert beta.root.is_dummy
    assert beta.size == 5
    assert beta.opening_message.msg_id == "b1"
    assert beta.opening_author == "bob@x"
    assert beta.subject == "beta"


def test_linear_chain():
    msgs = [make_msg("A", ts=1), make_msg("B", ts=2, refs=["A"]), make_msg("C", ts=3, refs=["A", "B"])]
    (t,) = build_threads(msgs)
    assert t.size == 3
    assert max(n.depth() for n in t.root.walk()) == 3
    assert shape(t.root) == ("A", [("B", [("C", [])])])


def test_unrelated_messages_stay_apart():
    ts = build_threads([make_msg("A", subject="one"), make_msg("B", ts=1, subject="two")])
    assert sizes(ts) == [1, 1]


def test_dangling_interior_reference_is_pruned():
    a = make_msg("A", ts=1, subject="s")
    b = make_msg("B", ts=2, subject="Re: s", refs=["A", "X"])
    (t,) = build_threads([a, b])
    assert shape(t.root) == ("A", [("B", [])])
    assert t.root.children[0].parent == "A"


def test_no_dummy_leaf_and_acyclic():
    for t in build_threads(fixture_messages()):
        for n in t.root.walk():
            assert not (n.is_dummy and not n.children)
        ids = [n.msg_id for n in t.root.walk()]
        assert len(ids) == len(set(ids))


def test_thread_dict_round_trip():
    msgs = fixture_messages()
    by_id = {m.msg_id: m for m in msgs}
    for t in build_threads(msgs):
        again = Thread.from_dict(t.to_dict(), by_id)
        assert shape(again.root) == shape(t.root)
        assert again.size == t.size


def test_duplicate_ids_rejected():
    with pytest.raises(DataIntegrityError):
        build_threads([make_msg("A"), make_msg("A", ts=5)])


def test_grouping_can_be_disabled():
    msgs = [make_msg("A", subject="s"), make_msg("B", ts=1, subject="Re: s")]
    assert sizes(build_threads(msgs, group_subjects=False)) == [1, 1]


# -- filter --


def _threads_of_sizes(ns):
    msgs = []
    for i, n in enumerate(ns):
        for j in range(n):
            msgs.append(make_msg(f"t{i}m{j}", ts=100 * i + j, subject=f"subject {i}",
                                 refs=[f"t{i}m0"] if j else []))
    return build_threads(msgs)


def test_filter_examples():
    assert sizes(filter_threads(_threads_of_sizes([1, 3, 2]), 2)) == [3, 2]
    assert filter_threads(_threads_of_sizes([1, 1, 1])) == []
    kept = filter_threads(_threads_of_sizes([1, 2, 5, 26]))
    assert len(kept) == 3 and sum(sizes(kept)) == 33


def test_filter_rejects_zero():
    with pytest.raises(ConfigError):
        filter_threads([], 0)


# -- summary --


def test_summary_examples():
    assert corpus_summary([]).as_tuple() == (0, 0, 0)
    msgs = [make_msg("1", "a@x", 1), make_msg("2", "b@x", 2, refs=["1"]), make_msg("3", "a@x", 3, refs=["1", "2"])]
    assert corpus_summary(build_threads(msgs)).as_tuple() == (1, 3, 2)


def test_summary_uses_identities():
    msgs = [make_msg("1", "a@x", 1), make_msg("2", "b@x", 2, refs=["1"])]
    ids = {"1": "p", "2": "p"}
    assert corpus_summary(build_threads(msgs), ids).as_tuple() == (1, 2, 1)


# -- properties --


@st.composite
def reply_corpora(draw):
    n = draw(st.integers(1, 25))
    msgs = []
    for i in range(n):
        kind = draw(st.sampled_from(["root", "reply", "refs", "dangling", "subject"]))
        subj = draw(st.sampled_from(["p", "q", "r"]))
        ts = draw(st.integers(0, 30))
        if kind == "root" or i == 0:
            msgs.append(make_msg(f"m{i}", ts=ts, subject=subj))
        elif kind == "reply":
            p = draw(st.integers(0, n - 1))
            msgs.append(make_msg(f"m{i}", ts=ts, subject="Re: " + subj, irt=f"m{p}"))
        elif kind == "refs":
            refs = draw(st.lists(st.integers(0, n - 1), max_size=4))
            msgs.append(make_msg(f"m{i}", ts=ts, subject="Re: " + subj, refs=[f"m{r}" for r in refs]))
        elif kind == "dangling":
            msgs.append(make_msg(f"m{i}", ts=ts, subject="Re: " + subj, refs=[f"ghost{draw(st.integers(0, 3))}"]))
        else:
            msgs.append(make_msg(f"m{i}", ts=ts, subject="Re: " + subj))
    return msgs


@given(reply_corpora())
@settings(max_examples=200, deadline=None)
def test_partition_and_acyclicity(msgs):
    threads = build_threads(msgs)
    assert sum(t.size for t in threads) == len(msgs)
    seen = [m.msg_id for t in threads for m in t.messages()]
    assert sorted(seen) == sorted(m.msg_id for m in msgs)
    for t in threads:
        for node in t.root.walk():
            assert not (node.is_dummy and not node.children)
            keys = [c.sort_key() for c in node.children]
            assert keys == sorted(keys)


@given(reply_corpora(), st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_order_independence(msgs, rnd):
    expected = [shape(t.root) for t in build_threads(msgs)]
    shuffled = list(msgs)
    rnd.shuffle(shuffled)
    assert [shape(t.root) for t in build_threads(shuffled)] == expected


@st.composite
def acyclic_corpora(draw):
    """Each message replies to at most one earlier message, so no link can be refused."""
    n = draw(st.integers(1, 25))
    parents = [None] + [draw(st.none() | st.integers(0, i - 1)) for i in range(1, n)]
    return [
        make_msg(f"m{i}", ts=draw(st.integers(0, 30)), subject=f"s{i}",
                 irt=None if p is None else f"m{p}")
        for i, p in enumerate(parents)
    ]


@given(acyclic_corpora())
@settings(max_examples=150, deadline=None)
def test_filter_keeps_every_reply_relation(msgs):
    kept = {m.msg_id for t in filter_threads(build_threads(msgs), 2) for m in t.messages()}
    for m in msgs:
        if m.in_reply_to is not None:
            assert m.msg_id in kept and m.in_reply_to in kept
