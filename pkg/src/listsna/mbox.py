"""MBox ingestion: split archives into raw records and normalize them.

Archives are treated as bytes throughout; message boundaries are lines that
start with ``From `` (RFC 4155).  Lines escaped as ``>From `` never split a
message and are un-escaped only when the body text is extracted.
"""

from __future__ import annotations

import calendar
import codecs
import email
import email.errors
import email.header
import email.utils
import hashlib
import html
import re
import time
from collections import Counter
from dataclasses import dataclass, field, fields
from email.message import Message as EmailMessage
from email.policy import compat32
from html.parser import HTMLParser
from pathlib import Path
from typing import BinaryIO, Iterable

from .errors import MboxFormatError
from .issues import Issue

SYNTHETIC_PREFIX = "synthetic:"
# Timestamp given to messages whose Date header cannot be parsed.  Always
# accompanied by an ``unparseable-date`` issue.
SENTINEL_TIMESTAMP = 0

_SEPARATOR = re.compile(rb"^From ", re.MULTILINE)
_MSGID = re.compile(r"<([^<>\s]+)>")
_FOLD = re.compile(r"\r?\n(?=[ \t])")
_MAILMAN_AT = re.compile(r"^\s*([^\s@<>()\"]+) at ([^\s@<>()\"]+\.[^\s@<>()\"]+)")
_FROM_ESCAPE = re.compile(r"^>(>*From )", re.MULTILINE)
_REPLY_PREFIX = re.compile(
    r"^(?:re|fwd?|aw|sv|antw)\s*(?:\[\d+\]|\^\d+)?\s*:\s*", re.IGNORECASE
)
_LIST_TAG = re.compile(r"^\[[^\]]*\]\s*(?=\S)")
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class RawMessage:
    source_offset: int
    from_line: bytes
    header_block: bytes
    body_block: bytes

    def to_bytes(self) -> bytes:
        return self.from_line + self.header_block + self.body_block


@dataclass(frozen=True)
class Message:
    msg_id: str
    sender_name: str
    sender_email: str
    timestamp_utc: int
    subject: str
    normalized_subject: str
    in_reply_to: str | None = None
    references: tuple[str, ...] = ()
    body_text: str = ""

    @property
    def is_synthetic(self) -> bool:
        return self.msg_id.startswith(SYNTHETIC_PREFIX)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["references"] = list(self.references)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        d = dict(d)
        d["references"] = tuple(d.get("references") or ())
        return cls(**d)


@dataclass
class MonthlyCounts:
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    mean: float | None = None
    peak: tuple[int, int] | None = None

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# -- splitting ---------------------------------------------------------------


def parse_mbox(archive: bytes | BinaryIO) -> list[RawMessage]:
    """Split an archive into one :class:`RawMessage` per separator line."""
    data = archive if isinstance(archive, (bytes, bytearray)) else archive.read()
    data = bytes(data)
    if not data:
        return []
    starts = [m.start() for m in _SEPARATOR.finditer(data)]
    if not starts or starts[0] != 0:
        raise MboxFormatError("archive does not begin with a 'From ' separator line", 0)

    records = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(data)
        nl = data.find(b"\n", start, end)
        line_end = end if nl < 0 else nl + 1
        header, body = _split_header(data[line_end:end])
        records.append(RawMessage(start, data[start:line_end], header, body))
    return records


def _split_header(chunk: bytes) -> tuple[bytes, bytes]:
    # The header block keeps its terminating blank line so that records
    # concatenate back into the original archive.
    pos = 0
    while pos < len(chunk):
        nl = chunk.find(b"\n", pos)
        line_end = len(chunk) if nl < 0 else nl + 1
        if chunk[pos:line_end] in (b"\n", b"\r\n"):
            return chunk[:line_end], chunk[line_end:]
        pos = line_end
    return chunk, b""


def read_archive(path: str | Path) -> list[RawMessage]:
    with open(path, "rb") as fh:
        return parse_mbox(fh)


# -- decoding helpers --------------------------------------------------------


def _decode_bytes(data: bytes, charset: str | None) -> str:
    if charset and charset.lower() not in ("unknown-8bit", "x-unknown"):
        try:
            codecs.lookup(charset)
        except LookupError:
            pass
        else:
            return data.decode(charset, errors="replace")
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("iso-8859-1")


def decode_header_value(value) -> str:
    """Decode a header (``str`` or :class:`email.header.Header`) to text.

    RFC 2047 encoded words are decoded with their declared charset; raw 8-bit
    headers fall back to UTF-8, then ISO-8859-1.
    """
    if value is None:
        return ""
    if isinstance(value, str):
        value = _FOLD.sub("", value)
    try:
        parts = email.header.decode_header(value)
    except email.errors.HeaderParseError:
        return _WS.sub(" ", str(value)).strip()
    out = []
    for chunk, charset in parts:
        out.append(chunk if isinstance(chunk, str) else _decode_bytes(chunk, charset))
    text = "".join(out)
    if not isinstance(value, str) and "=?" in text:
        # 8-bit header that also carries encoded words.
        text = decode_header_value(text)
    return _WS.sub(" ", text).strip()


def _header_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return _FOLD.sub("", value)
    return "".join(
        c if isinstance(c, str) else _decode_bytes(c, cs)
        for c, cs in email.header.decode_header(value)
    )


def normalize_subject(subject: str) -> str:
    """Strip reply/forward prefixes and list tags, collapse spaces, case-fold."""
    s = subject.strip()
    while True:
        stripped = _LIST_TAG.sub("", _REPLY_PREFIX.sub("", s, count=1), count=1)
        if stripped == s:
            break
        s = stripped
    return _WS.sub(" ", s).strip().casefold()


def has_reply_prefix(subject: str) -> bool:
    s = subject.strip()
    while (m := _LIST_TAG.match(s)) is not None:
        s = s[m.end():]
    return _REPLY_PREFIX.match(s) is not None


def parse_sender(value) -> tuple[str, str]:
    text = _header_text(value)
    text = _MAILMAN_AT.sub(r"\1@\2", text)
    name, addr = email.utils.parseaddr(text)
    name = decode_header_value(name)
    addr = addr.strip().lower()
    if not name and not addr:
        name = decode_header_value(text)
    return name, addr


_ZONE_SUFFIX = re.compile(r"(?:[+-]\d{4}|\b[A-Za-z]{1,5})\s*(?:\([^)]*\))?\s*$")


def parse_date(value) -> tuple[int | None, bool]:
    """Return ``(utc_seconds, had_zone)``; ``utc_seconds`` is None on failure."""
    text = _header_text(value).strip()
    if not text:
        return None, False
    try:
        parsed = email.utils.parsedate_tz(text)
        if parsed is None:
            return None, False
        base = calendar.timegm(parsed[:6])
    except (TypeError, ValueError, OverflowError, IndexError):
        return None, False
    # parsedate_tz reports a missing zone as offset 0, so look for one explicitly.
    offset = parsed[9]
    if offset is None or not _ZONE_SUFFIX.search(text):
        return base, False
    return base - offset, True


def _first_id(value) -> str | None:
    m = _MSGID.search(_header_text(value))
    return m.group(1) if m else None


def _all_ids(value) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for ref in _MSGID.findall(_header_text(value)):
        seen.setdefault(ref, None)
    return tuple(seen)


def synthetic_id(sender_email: str, timestamp_utc: int, subject: str) -> str:
    subject_hash = hashlib.sha256(subject.encode("utf-8")).hexdigest()
    key = f"{sender_email}\n{timestamp_utc}\n{subject_hash}".encode("utf-8")
    return SYNTHETIC_PREFIX + hashlib.sha256(key).hexdigest()[:32]


class _TextExtractor(HTMLParser):
    _SKIP = {"script", "style", "head"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._depth += 1

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._depth:
            self._depth -= 1

    def handle_data(self, data):
        if not self._depth:
            self.parts.append(data)


def strip_html(markup: str) -> str:
    parser = _TextExtractor()
    parser.feed(markup)
    parser.close()
    return html.unescape("".join(parser.parts)).strip()


def _part_text(part: EmailMessage) -> str:
    payload = part.get_payload(decode=True)
    if payload is None:
        return ""
    return _decode_bytes(payload, part.get_content_charset())


def _is_attachment(part: EmailMessage) -> bool:
    disposition = (part.get("Content-Disposition") or "").split(";")[0].strip().lower()
    return disposition == "attachment"


def extract_body(msg: EmailMessage) -> str:
    """First inline text/plain part, else the first text/html with tags removed."""
    html_part = None
    for part in msg.walk():
        if part.is_multipart() or _is_attachment(part):
            continue
        ctype = part.get_content_type()
        if ctype == "text/plain":
            text = _part_text(part)
            break
        if ctype == "text/html" and html_part is None:
            html_part = part
    else:
        text = strip_html(_part_text(html_part)) if html_part is not None else ""
    text = text.replace("\r\n", "\n")
    text = _FROM_ESCAPE.sub(r"\1", text)
    return text.rstrip("\n")


# -- normalization -----------------------------------------------------------


def normalize_message(raw: RawMessage, issues: list[Issue] | None = None) -> Message:
    msg = email.message_from_bytes(raw.header_block + raw.body_block, policy=compat32)
    sender_name, sender_email = parse_sender(msg.get("From"))
    subject = decode_header_value(msg.get("Subject"))
    ref = f"offset:{raw.source_offset}"

    notes: list[tuple[str, str]] = []
    timestamp, had_zone = parse_date(msg.get("Date"))
    if timestamp is None:
        notes.append(("unparseable-date", f"Date header {_header_text(msg.get('Date'))!r}"))
        timestamp = SENTINEL_TIMESTAMP
    elif not had_zone:
        notes.append(("date-without-zone", "no zone offset; assumed UTC"))

    msg_id = _first_id(msg.get("Message-ID"))
    if msg_id is None:
        msg_id = synthetic_id(sender_email, timestamp, subject)
        notes.append(("missing-message-id", f"assigned {msg_id}"))

    if issues is not None:
        for kind, detail in notes:
            issues.append(Issue("ingest", kind, f"{msg_id} ({ref})", detail))

    return Message(
        msg_id=msg_id,
        sender_name=sender_name,
        sender_email=sender_email,
        timestamp_utc=timestamp,
        subject=subject,
        normalized_subject=normalize_subject(subject),
        in_reply_to=_first_id(msg.get("In-Reply-To")),
        references=_all_ids(msg.get("References")),
        body_text=extract_body(msg),
    )


def deduplicate(messages: Iterable[Message], issues: list[Issue] | None = None) -> list[Message]:
    """Drop exact duplicates; keep conflicting reuses of an id under a suffixed id."""
    seen: dict[str, Message] = {}
    counts: Counter[str] = Counter()
    out = []
    for m in messages:
        prior = seen.get(m.msg_id)
        if prior is None:
            seen[m.msg_id] = m
            out.append(m)
            continue
        if prior == m:
            if issues is not None:
                issues.append(Issue("ingest", "duplicate-message", m.msg_id, "exact copy dropped"))
            continue
        counts[m.msg_id] += 1
        new_id = f"{m.msg_id}#{counts[m.msg_id] + 1}"
        while new_id in seen:
            counts[m.msg_id] += 1
            new_id = f"{m.msg_id}#{counts[m.msg_id] + 1}"
        renamed = Message(**{**m.to_dict(), "msg_id": new_id, "references": m.references})
        if issues is not None:
            issues.append(Issue("ingest", "conflicting-message-id", m.msg_id, f"kept as {new_id}"))
        seen[new_id] = renamed
        out.append(renamed)
    return out


def ingest(paths: Iterable[str | Path], issues: list[Issue] | None = None) -> list[Message]:
    """Parse, normalize and deduplicate every archive, in the given order."""
    messages = []
    for path in paths:
        for raw in read_archive(path):
            messages.append(normalize_message(raw, issues))
    return deduplicate(messages, issues)


# -- monthly statistics ------------------------------------------------------


def _month_of(ts: int) -> tuple[int, int]:
    t = time.gmtime(ts)
    return t.tm_year, t.tm_mon


def monthly_counts(messages: Iterable[Message]) -> MonthlyCounts:
    """Messages per UTC calendar month, gap months filled with zero.

    ``mean`` is taken over every month from the first to the last non-empty
    one; ``peak`` is the busiest month, earliest on ties.
    """
    hits = Counter(_month_of(m.timestamp_utc) for m in messages)
    if not hits:
        return MonthlyCounts()
    (y, mo), last = min(hits), max(hits)
    counts: dict[tuple[int, int], int] = {}
    while (y, mo) <= last:
        counts[(y, mo)] = hits.get((y, mo), 0)
        y, mo = (y + 1, 1) if mo == 12 else (y, mo + 1)
    peak = max(counts, key=lambda k: (counts[k], -k[0], -k[1]))
    return MonthlyCounts(counts, sum(counts.values()) / len(counts), peak)

