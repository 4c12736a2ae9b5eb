"""Author identity resolution.

Senders sharing an address are always the same identity.  A human-edited
alias file then merges further addresses (or names) onto chosen canonical
ids.  Near-identical names are only *suggested* for merging, in the alias
file format, so the manual step stays explicit.
"""

from __future__ import annotations

import csv
import fnmatch
import io
import itertools
import string
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ConfigError
from .mbox import Message

NAME_PREFIX = "name:"
DEFAULT_THRESHOLD = 2

_PUNCT = str.maketrans({c: " " for c in string.punctuation})
_PUNCT_KEEP_GLOB = str.maketrans({c: " " for c in string.punctuation if c not in "*?[]!"})


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insertions, deletions and substitutions."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def normalize_name(name: str, keep_glob: bool = False) -> str:
    decomposed = unicodedata.normalize("NFKD", name)
    text = "".join(c for c in decomposed if not unicodedata.combining(c))
    table = _PUNCT_KEEP_GLOB if keep_glob else _PUNCT
    return " ".join(text.casefold().translate(table).split())


@dataclass(frozen=True)
class AliasRule:
    pattern: str
    canonical_id: str
    provenance: str = ""
    line: int = 0

    @property
    def is_name_rule(self) -> bool:
        return self.pattern.startswith(NAME_PREFIX)

    def matches_email(self, email: str) -> bool:
        return not self.is_name_rule and fnmatch.fnmatchcase(email, self.pattern.lower())

    def matches_name(self, normalized: str) -> bool:
        if not self.is_name_rule:
            return False
        pattern = normalize_name(self.pattern[len(NAME_PREFIX):], keep_glob=True)
        return fnmatch.fnmatchcase(normalized, pattern)

    def describe(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.pattern} -> {self.canonical_id}"


@dataclass
class AliasMap:
    merge_rules: list[AliasRule] = field(default_factory=list)

    def __post_init__(self):
        by_pattern: dict[str, AliasRule] = {}
        for rule in self.merge_rules:
            key = rule.pattern.lower()
            other = by_pattern.get(key)
            if other is not None and other.canonical_id != rule.canonical_id:
                raise ConfigError(f"conflicting alias rules: {other.describe()} / {rule.describe()}")
            by_pattern[key] = rule

    @classmethod
    def parse(cls, text: str) -> "AliasMap":
        """Parse ``pattern, canonical_id, comment`` lines; ``#`` starts a comment line."""
        rules = []
        for lineno, row in enumerate(csv.reader(io.StringIO(text), skipinitialspace=True), 1):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2 or not row[1].strip():
                raise ConfigError(f"alias file line {lineno}: expected 'pattern, canonical_id[, comment]'")
            comment = ",".join(row[2:]).strip()
            rules.append(AliasRule(row[0].strip(), row[1].strip(), comment, lineno))
        return cls(rules)

    @classmethod
    def load(cls, path: str | Path) -> "AliasMap":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return format_rules(self.merge_rules)

    def extended(self, rules: Iterable[AliasRule]) -> "AliasMap":
        return AliasMap(self.merge_rules + list(rules))


def format_rules(rules: Iterable[AliasRule]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for r in rules:
        writer.writerow([r.pattern, r.canonical_id, r.provenance])
    return buf.getvalue()


@dataclass
class Identity:
    canonical_id: str
    display_name: str
    emails: set[str] = field(default_factory=set)
    name_variants: set[str] = field(default_factory=set)
    message_count: int = 0

    def to_dict(self) -> dict:
        return {
            "canonical_id": self.canonical_id,
            "display_name": self.display_name,
            "emails": sorted(self.emails),
            "name_variants": sorted(self.name_variants),
            "message_count": self.message_count,
        }


@dataclass(frozen=True)
class MergeSuggestion:
    keep: str
    merge: str
    distance: int
    names: tuple[str, str]

    def as_rules(self, identities: dict[str, Identity]) -> list[AliasRule]:
        keep = self.keep
        note = f"suggested: '{self.names[0]}' ~ '{self.names[1]}' (distance {self.distance})"
        merged = identities[self.merge]
        if merged.emails:
            return [AliasRule(e, keep, note) for e in sorted(merged.emails)]
        return [AliasRule(NAME_PREFIX + n, keep, note) for n in sorted(merged.name_variants)]


@dataclass
class Resolution:
    by_msg_id: dict[str, str]
    identities: list[Identity]
    suggestions: list[MergeSuggestion]

    def identity(self, canonical_id: str) -> Identity:
        for ident in self.identities:
            if ident.canonical_id == canonical_id:
                return ident
        raise KeyError(canonical_id)

    def suggestion_rules(self) -> list[AliasRule]:
        """Rules that accept every suggestion at once.

        Chains of suggestions (a~b, b~c) all point at the smallest id of the
        chain, so accepting the rules leaves nothing further to suggest.
        """
        index = {i.canonical_id: i for i in self.identities}
        root = {cid: cid for cid in index}

        def find(x: str) -> str:
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        for s in self.suggestions:
            a, b = sorted((find(s.keep), find(s.merge)))
            root[b] = a
        first: dict[str, MergeSuggestion] = {}
        for s in self.suggestions:
            first.setdefault(s.merge, s)
            first.setdefault(s.keep, s)
        rules: list[AliasRule] = []
        for cid in sorted(index):
            target = find(cid)
            if target != cid:
                s = first[cid]
                rules.extend(MergeSuggestion(target, cid, s.distance, s.names).as_rules(index))
        return rules


def _sender_key(m: Message) -> str:
    if m.sender_email:
        return m.sender_email
    return NAME_PREFIX + (normalize_name(m.sender_name) or "unknown")


def _rule_target(key: str, names: set[str], aliases: AliasMap) -> str | None:
    hits: dict[str, AliasRule] = {}
    for rule in aliases.merge_rules:
        matched = rule.matches_email(key) if not key.startswith(NAME_PREFIX) else False
        matched = matched or any(rule.matches_name(n) for n in names)
        if matched:
            hits.setdefault(rule.canonical_id, rule)
    if len(hits) > 1:
        a, b = list(hits.values())[:2]
        raise ConfigError(f"conflicting alias rules for {key}: {a.describe()} / {b.describe()}")
    return next(iter(hits), None)


def resolve_identities(
    messages: Iterable[Message],
    aliases: AliasMap | None = None,
    threshold: int = DEFAULT_THRESHOLD,
) -> Resolution:
    aliases = aliases or AliasMap()
    messages = list(messages)

    # Exact-address groups.
    group_msgs: dict[str, list[Message]] = defaultdict(list)
    for m in messages:
        group_msgs[_sender_key(m)].append(m)

    # Alias rules remap whole address groups; otherwise the lowest address wins.
    members: dict[str, list[str]] = defaultdict(list)
    for key in sorted(group_msgs):
        names = {normalize_name(m.sender_name) for m in group_msgs[key]} - {""}
        target = _rule_target(key, names, aliases)
        members[target if target is not None else key].append(key)

    identities = []
    by_msg_id: dict[str, str] = {}
    for cid in sorted(members):
        raw_names: Counter[str] = Counter()
        ident = Identity(cid, "")
        for key in members[cid]:
            if not key.startswith(NAME_PREFIX):
                ident.emails.add(key)
            for m in group_msgs[key]:
                by_msg_id[m.msg_id] = cid
                ident.message_count += 1
                if m.sender_name:
                    raw_names[m.sender_name] += 1
                    ident.name_variants.add(normalize_name(m.sender_name))
        ident.name_variants.discard("")
        if raw_names:
            ident.display_name = min(raw_names, key=lambda n: (-raw_names[n], n))
        else:
            ident.display_name = min(ident.emails) if ident.emails else cid
        identities.append(ident)

    return Resolution(by_msg_id, identities, suggest_merges(identities, threshold))


def suggest_merges(identities: list[Identity], threshold: int = DEFAULT_THRESHOLD) -> list[MergeSuggestion]:
    """Pairs whose closest name variants are within ``threshold`` edits and share a token."""
    by_token: dict[str, set[int]] = defaultdict(set)
    for idx, ident in enumerate(identities):
        for name in ident.name_variants:
            for token in name.split():
                by_token[token].add(idx)

    candidates: set[tuple[int, int]] = set()
    for idxs in by_token.values():
        candidates.update(itertools.combinations(sorted(idxs), 2))

    out = []
    for i, j in sorted(candidates):
        a, b = identities[i], identities[j]
        best = None
        for na in sorted(a.name_variants):
            for nb in sorted(b.name_variants):
                if not set(na.split()) & set(nb.split()):
                    continue
                d = levenshtein(na, nb)
                if d <= threshold and (best is None or d < best[0]):
                    best = (d, na, nb)
        if best is not None:
            keep, merge = sorted((a.canonical_id, b.canonical_id))
            names = (best[1], best[2]) if keep == a.canonical_id else (best[2], best[1])
            out.append(MergeSuggestion(keep, merge, best[0], names))
    return out
