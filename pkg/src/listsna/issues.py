from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Issue:
    """One entry of a stage's warning log.

    ``ref`` identifies the affected record: a msg_id, or ``offset:<n>`` for
    archive-level problems.
    """

    stage: str
    kind: str
    ref: str
    detail: str

    def to_dict(self) -> dict:
        return asdict(self)
