import random
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from listsna.graph import CommGraph  # noqa: E402
from listsna.mbox import Message  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def make_msg(msg_id, sender="a@x.org", ts=0, subject="topic", irt=None, refs=(), name=None, body=""):
    from listsna.mbox import normalize_subject

    return Message(
        msg_id=msg_id,
        sender_name=name if name is not None else sender.split("@")[0],
        sender_email=sender,
        timestamp_utc=ts,
        subject=subject,
        normalized_subject=normalize_subject(subject),
        in_reply_to=irt,
        references=tuple(refs),
        body_text=body,
    )


def random_digraph(rng: random.Random, n: int, p: float):
    nodes = [f"n{i}" for i in range(n)]
    edges = {(a, b): rng.randint(1, 5) for a in nodes for b in nodes if a != b and rng.random() < p}
    return CommGraph.from_edges(edges, nodes=nodes)


@st.composite
def digraphs(draw, max_nodes=8, min_nodes=1):
    n = draw(st.integers(min_nodes, max_nodes))
    nodes = [f"v{i}" for i in range(n)]
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = draw(st.lists(st.integers(1, 9), min_size=len(chosen), max_size=len(chosen)))
    return CommGraph.from_edges(dict(zip(chosen, weights)), nodes=nodes)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# Acceptance criteria report one line each at the end of the run.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
