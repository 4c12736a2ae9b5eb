"""Reply-tree reconstruction with the jwz container algorithm.

See http://www.jwz.org/doc/threading.html.  The steps are the classic ones:
link containers along References (then In-Reply-To when References is
empty), prune empty containers, then merge root-set members that share a
normalized subject.  Messages are processed in (timestamp, msg_id) order so
the result does not depend on input order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import ConfigError, DataIntegrityError
from .issues import Issue
from .mbox import Message, has_reply_prefix

DUMMY_SUBJECT_PREFIX = "dummy:subject:"


class _Container:
    __slots__ = ("msg_id", "message", "parent", "children")

    def __init__(self, msg_id: str, message: Message | None = None):
        self.msg_id = msg_id
        self.message = message
        self.parent: _Container | None = None
        self.children: list[_Container] = []

    def add_child(self, child: "_Container") -> None:
        if child.parent is not None:
            child.parent.children.remove(child)
        self.children.append(child)
        child.parent = self

    def detach(self) -> None:
        if self.parent is not None:
            self.parent.children.remove(self)
            self.parent = None

    def is_ancestor_of(self, other: "_Container") -> bool:
        node = other
        while node is not None:
            if node is self:
                return True
            node = node.parent
        return False


@dataclass
class ThreadNode:
    msg_id: str
    message: Message | None = None
    children: list["ThreadNode"] = field(default_factory=list)
    parent: str | None = None

    @property
    def is_dummy(self) -> bool:
        return self.message is None

    def walk(self) -> Iterator["ThreadNode"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children)

    def sort_key(self) -> tuple:
        # Dummies sort by their earliest real descendant.
        if self.message is not None:
            m = self.message
            return (m.timestamp_utc, m.is_synthetic, m.msg_id)
        keys = [c.sort_key() for c in self.children]
        return min(keys) if keys else (float("inf"), True, self.msg_id)

    def to_dict(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "dummy": self.is_dummy,
            "parent": self.parent,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class Thread:
    root: ThreadNode

    def messages(self) -> list[Message]:
        return [n.message for n in self.root.walk() if n.message is not None]

    @property
    def size(self) -> int:
        return sum(1 for n in self.root.walk() if n.message is not None)

    @property
    def opening_message(self) -> Message:
        """The root message, or the earliest real message under a dummy root."""
        if self.root.message is not None:
            return self.root.message
        return min(self.messages(), key=lambda m: (m.timestamp_utc, m.is_synthetic, m.msg_id))

    @property
    def opening_author(self) -> str:
        return self.opening_message.sender_email

    @property
    def subject(self) -> str:
        return self.opening_message.normalized_subject

    def to_dict(self) -> dict:
        return {
            "root": self.root.to_dict(),
            "size": self.size,
            "subject": self.subject,
            "opening_msg_id": self.opening_message.msg_id,
            "opening_author": self.opening_author,
        }

    @classmethod
    def from_dict(cls, d: dict, messages: dict[str, Message]) -> "Thread":
        def build(nd: dict) -> ThreadNode:
            msg = None
            if not nd["dummy"]:
                try:
                    msg = messages[nd["msg_id"]]
                except KeyError:
                    raise DataIntegrityError("thread references unknown message", nd["msg_id"]) from None
            return ThreadNode(nd["msg_id"], msg, [build(c) for c in nd["children"]], nd["parent"])

        return cls(build(d["root"]))


def _message_order(m: Message) -> tuple:
    return (m.timestamp_utc, m.is_synthetic, m.msg_id)


def _link(messages: list[Message], issues: list[Issue] | None) -> dict[str, _Container]:
    table: dict[str, _Container] = {}

    def get(msg_id: str) -> _Container:
        c = table.get(msg_id)
        if c is None:
            c = table[msg_id] = _Container(msg_id)
        return c

    def warn(kind: str, ref: str, detail: str) -> None:
        if issues is not None:
            issues.append(Issue("thread", kind, ref, detail))

    for msg in sorted(messages, key=_message_order):
        this = get(msg.msg_id)
        this.message = msg
        refs = list(msg.references) or ([msg.in_reply_to] if msg.in_reply_to else [])
        refs = [r for r in refs if r != msg.msg_id]

        prev = None
        for ref in refs:
            container = get(ref)
            if prev is not None and container.parent is None and container is not prev:
                if container.is_ancestor_of(prev):
                    warn("reference-cycle", msg.msg_id, f"ignored link {prev.msg_id} -> {ref}")
                else:
                    prev.add_child(container)
            prev = container

        if prev is None:
            this.detach()
        elif this.is_ancestor_of(prev):
            warn("reference-cycle", msg.msg_id, f"ignored parent {prev.msg_id}")
            this.detach()
        elif this.parent is not prev:
            prev.add_child(this)
    return table


def _prune(container: _Container, at_root: bool) -> list[_Container]:
    """Return the containers that replace ``container`` after pruning."""
    new_children: list[_Container] = []
    for child in list(container.children):
        child.parent = None
        new_children.extend(_prune(child, at_root=False))
    container.children = []
    for child in new_children:
        container.add_child(child)

    if container.message is not None:
        return [container]
    if not container.children:
        return []
    if not at_root or len(container.children) == 1:
        promoted = list(container.children)
        for child in promoted:
            child.parent = None
        container.children = []
        return promoted
    return [container]


def _root_subject(c: _Container) -> tuple[str, bool]:
    msg = c.message if c.message is not None else min(
        (ch.message for ch in c.children if ch.message is not None), key=_message_order
    )
    return msg.normalized_subject, has_reply_prefix(msg.subject)


def _group_by_subject(roots: list[_Container]) -> list[_Container]:
    table: dict[str, _Container] = {}
    for c in roots:
        subj, is_reply = _root_subject(c)
        if not subj:
            continue
        old = table.get(subj)
        if (
            old is None
            or (c.message is None and old.message is not None)
            or (
                old.message is not None
                and c.message is not None
                and has_reply_prefix(old.message.subject)
                and not is_reply
            )
        ):
            table[subj] = c

    created: list[_Container] = []
    absorbed: set[int] = set()
    for c in roots:
        if c.parent is not None:
            continue
        subj, is_reply = _root_subject(c)
        target = table.get(subj) if subj else None
        if target is None or target is c:
            continue
        if target.message is None and c.message is None:
            for child in list(c.children):
                target.add_child(child)
            absorbed.add(id(c))
        elif target.message is None:
            target.add_child(c)
        elif c.message is None:
            c.add_child(target)
            table[subj] = c
        elif not has_reply_prefix(target.message.subject) and is_reply:
            target.add_child(c)
        else:
            # Siblings under a fresh dummy: no reply relation is asserted.
            dummy = _Container(DUMMY_SUBJECT_PREFIX + hashlib.sha256(subj.encode()).hexdigest()[:16])
            dummy.add_child(target)
            dummy.add_child(c)
            table[subj] = dummy
            created.append(dummy)
    return [c for c in roots + created if c.parent is None and id(c) not in absorbed]


def _freeze(c: _Container, parent: str | None) -> ThreadNode:
    node = ThreadNode(c.msg_id, c.message, parent=parent)
    node.children = [_freeze(ch, c.msg_id) for ch in c.children]
    node.children.sort(key=ThreadNode.sort_key)
    return node


def build_threads(
    messages: Iterable[Message],
    issues: list[Issue] | None = None,
    group_subjects: bool = True,
) -> list[Thread]:
    """Thread ``messages``; every message ends up in exactly one thread."""
    messages = list(messages)
    seen: set[str] = set()
    for m in messages:
        if m.msg_id in seen:
            raise DataIntegrityError("duplicate msg_id passed to build_threads", m.msg_id)
        seen.add(m.msg_id)

    table = _link(messages, issues)
    roots = [c for c in table.values() if c.parent is None]
    pruned: list[_Container] = []
    for c in roots:
        pruned.extend(_prune(c, at_root=True))
    if group_subjects:
        pruned = _group_by_subject(pruned)

    threads = [Thread(_freeze(c, None)) for c in pruned]
    threads.sort(key=lambda t: t.root.sort_key())
    return threads


def filter_threads(threads: Iterable[Thread], min_size: int = 2) -> list[Thread]:
    if min_size < 1:
        raise ConfigError(f"min_size must be at least 1, got {min_size}")
    return [t for t in threads if t.size >= min_size]


@dataclass(frozen=True)
class CorpusSummary:
    threads: int
    messages: int
    authors: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.threads, self.messages, self.authors)


def corpus_summary(threads: Iterable[Thread], identities: dict[str, str] | None = None) -> CorpusSummary:
    """Counts over ``threads``; authors are resolved through ``identities``.

    ``identities`` maps msg_id to canonical id; without it each sender address
    counts as its own author.
    """
    n_threads = n_messages = 0
    authors: set[str] = set()
    for t in threads:
        n_threads += 1
        for m in t.messages():
            n_messages += 1
            authors.add(identities[m.msg_id] if identities is not None else m.sender_email)
    return CorpusSummary(n_threads, n_messages, len(authors))
