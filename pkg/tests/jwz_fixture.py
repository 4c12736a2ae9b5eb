"""Twenty messages covering reply chains, dangling references, subject grouping and a cycle.

The expected forest below was derived by stepping through the container
algorithm by hand (link, prune, group by subject) for this exact input.
"""

import hashlib

from conftest import make_msg

SYN = "synthetic:0f3"


def fixture_messages():
    m = make_msg
    return [
        # chain; References outrank In-Reply-To
        m("a1", "ann@x", 1, "alpha"),
        m("a2", "bob@x", 2, "Re: alpha", refs=["a1"]),
        m("a3", "cat@x", 3, "Re: alpha", refs=["a1", "a2"]),
        m("a4", "ann@x", 4, "Re: alpha", irt="a3", refs=["a1", "a2"]),
        m("a5", "dan@x", 5, "Re: alpha", irt="a1"),
        # dangling references: x1 is interior, x2 a lone root, x3 a root with two replies
        m("b1", "bob@x", 6, "beta"),
        m("b2", "cat@x", 7, "Re: beta", refs=["b1", "x1"]),
        m("b3", "dan@x", 8, "Re: beta", refs=["x2"]),
        m("b4", "ann@x", 9, "Re: beta", refs=["x3"]),
        m("b5", "bob@x", 10, "Re: beta", refs=["x3"]),
        # subject grouping without headers
        m("c1", "cat@x", 11, "gamma"),
        m("c2", "dan@x", 12, "Re: gamma"),
        m("c3", "eve@x", 13, "gamma"),
        # d1 claims d2 as parent, d2 claims d1: a cycle
        m("d1", "ann@x", 14, "delta", refs=["d2"]),
        m("d2", "bob@x", 15, "Re: delta", refs=["d1"]),
        # same-second siblings; the synthetic id sorts last
        m("f1", "cat@x", 16, "eta"),
        m(SYN, "dan@x", 17, "Re: eta", irt="f1"),
        m("zz", "eve@x", 17, "Re: eta", irt="f1"),
        # singletons
        m("e1", "eve@x", 19, "epsilon"),
        m("e2", "ann@x", 20, "Re: zeta", irt="gone"),
    ]


GAMMA_DUMMY = "dummy:subject:" + hashlib.sha256(b"gamma").hexdigest()[:16]

EXPECTED_FOREST = [
    ("a1", [("a2", [("a3", []), ("a4", [])]), ("a5", [])]),
    ("x3", [("b1", [("b2", [])]), ("b3", []), ("b4", []), ("b5", [])]),
    (GAMMA_DUMMY, [("c1", [("c2", [])]), ("c3", [])]),
    ("d2", [("d1", [])]),
    ("f1", [("zz", []), (SYN, [])]),
    ("e1", []),
    ("e2", []),
]


def shape(node):
    return (node.msg_id, [shape(c) for c in node.children])
