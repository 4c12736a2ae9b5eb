"""Versioned, digest-checked stage datasets on disk.

Each stage ``<name>`` writes ``<name>.jsonl`` (one JSON record per line) and
a sidecar ``<name>.meta.json`` holding the schema version, the SHA-256 of
the records file, the digests of the inputs it was computed from, the
parameters used, and digests of any auxiliary files it produced.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import DataError

SCHEMA_VERSIONS = {
    "messages": 1,
    "threads": 1,
    "identities": 1,
    "graph": 1,
    "metrics": 1,
    "communities": 1,
    "topics": 1,
    "report": 1,
}


def sha256_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def dumps_record(record: Any) -> str:
    return json.dumps(record, ensure_ascii=False, allow_nan=False)


def encode_records(records: Iterable[Any]) -> bytes:
    return "".join(dumps_record(r) + "\n" for r in records).encode("utf-8")


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class StageDataset:
    stage: str
    records: list[Any]
    schema_version: int = 0
    digest: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.schema_version:
            self.schema_version = SCHEMA_VERSIONS[self.stage]
        if not self.digest:
            self.digest = sha256_bytes(encode_records(self.records))

    def meta(self) -> dict:
        return {
            "stage": self.stage,
            "schema_version": self.schema_version,
            "count": len(self.records),
            "digest": self.digest,
            "inputs": dict(sorted(self.inputs.items())),
            "params": self.params,
            "artifacts": dict(sorted(self.artifacts.items())),
        }


def records_path(out_dir: Path, stage: str) -> Path:
    return out_dir / f"{stage}.jsonl"


def meta_path(out_dir: Path, stage: str) -> Path:
    return out_dir / f"{stage}.meta.json"


def write_stage(out_dir: str | Path, ds: StageDataset) -> StageDataset:
    """Persist ``ds``; ``ds.artifacts`` must name files already written in ``out_dir``."""
    out_dir = Path(out_dir)
    data = encode_records(ds.records)
    ds.digest = sha256_bytes(data)
    atomic_write(records_path(out_dir, ds.stage), data)
    meta = json.dumps(ds.meta(), indent=2, sort_keys=False, ensure_ascii=False) + "\n"
    atomic_write(meta_path(out_dir, ds.stage), meta.encode("utf-8"))
    return ds


def read_meta(out_dir: str | Path, stage: str) -> dict | None:
    path = meta_path(Path(out_dir), stage)
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None


def read_stage(out_dir: str | Path, stage: str) -> StageDataset:
    """Load and verify a stage; raises DataError on any mismatch."""
    out_dir = Path(out_dir)
    meta = read_meta(out_dir, stage)
    if meta is None:
        raise DataError(f"stage '{stage}' has no metadata in {out_dir}")
    expected = SCHEMA_VERSIONS[stage]
    if meta.get("schema_version") != expected:
        raise DataError(
            f"stage '{stage}' has schema version {meta.get('schema_version')}, expected {expected}"
        )
    path = records_path(out_dir, stage)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if sha256_bytes(data) != meta.get("digest"):
        raise DataError(f"stage '{stage}' digest mismatch: {path} was modified or truncated")
    records = [json.loads(line) for line in data.decode("utf-8").splitlines() if line]
    return StageDataset(
        stage,
        records,
        schema_version=meta["schema_version"],
        digest=meta["digest"],
        inputs=meta.get("inputs", {}),
        params=meta.get("params", {}),
        artifacts=meta.get("artifacts", {}),
    )


def is_fresh(out_dir: str | Path, stage: str, inputs: dict[str, str], params: dict) -> bool:
    """True if the stored stage matches ``inputs``/``params`` and is intact."""
    out_dir = Path(out_dir)
    meta = read_meta(out_dir, stage)
    if meta is None or meta.get("schema_version") != SCHEMA_VERSIONS[stage]:
        return False
    if meta.get("inputs") != dict(sorted(inputs.items())):
        return False
    if _normalize(meta.get("params")) != _normalize(params):
        return False
    path = records_path(out_dir, stage)
    if not path.exists() or sha256_file(path) != meta.get("digest"):
        return False
    for name, digest in meta.get("artifacts", {}).items():
        artifact = out_dir / name
        if not artifact.exists() or sha256_file(artifact) != digest:
            return False
    return True


def _normalize(obj: Any) -> Any:
    return json.loads(json.dumps(obj, sort_keys=True))
