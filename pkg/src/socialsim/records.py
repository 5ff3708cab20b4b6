"""Versioned line-delimited JSON files.

The first line of every file is a header naming the record kind and the
schema version. Readers refuse files whose major version they do not know.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import SchemaVersionError

SCHEMA_VERSION = "1.0"
SCHEMA_PREFIX = "socialsim."
KINDS = ("trajectory", "decision", "memory", "transcript", "trajectory_reference", "poi_table", "group_profiles")


def dumps(record: Mapping[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def header(kind: str, **meta: Any) -> dict:
    return {"schema": SCHEMA_PREFIX + kind, "version": SCHEMA_VERSION, **meta}


def check_header(doc: Mapping[str, Any], kind: str | None = None) -> str:
    schema = doc.get("schema")
    if not isinstance(schema, str) or not schema.startswith(SCHEMA_PREFIX):
        raise SchemaVersionError(f"missing or foreign schema tag: {schema!r}")
    found = schema[len(SCHEMA_PREFIX):]
    if kind is not None and found != kind:
        raise SchemaVersionError(f"expected a {kind} file, found {found}")
    version = str(doc.get("version", ""))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaVersionError(f"unsupported {found} schema version {version!r} (reader knows {SCHEMA_VERSION})")
    return found


class JsonlWriter:
    """Append-only writer; ``offset`` is the byte position after the last full record."""

    def __init__(self, path: str | Path, kind: str, *, append: bool = False, **meta: Any):
        self.path = Path(path)
        self.kind = kind
        if append and self.path.exists():
            self._fh = open(self.path, "ab")
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "wb")
            self._write(header(kind, **meta))

    def _write(self, doc: Mapping[str, Any]) -> None:
        self._fh.write((dumps(doc) + "\n").encode("utf-8"))

    def write(self, record: Mapping[str, Any]) -> None:
        self._write(record)

    def write_all(self, records: Iterable[Mapping[str, Any]]) -> None:
        for r in records:
            self._write(r)

    @property
    def offset(self) -> int:
        return self._fh.tell()

    def flush(self) -> None:
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def truncate(path: str | Path, offset: int) -> None:
    with open(path, "r+b") as fh:
        fh.truncate(offset)


def iter_jsonl(path: str | Path, kind: str | None = None) -> Iterator[dict]:
    """Records of a versioned file, header excluded."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise SchemaVersionError(f"{path}: empty file, no schema header")
        check_header(json.loads(first), kind)
        for line in fh:
            if line.strip():
                yield json.loads(line)


def read_header(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.loads(fh.readline())
    check_header(doc)
    return doc


def read_jsonl(path: str | Path, kind: str | None = None) -> list[dict]:
    return list(iter_jsonl(path, kind))


def write_jsonl(path: str | Path, kind: str, records: Iterable[Mapping[str, Any]], **meta: Any) -> int:
    n = 0
    with JsonlWriter(path, kind, **meta) as w:
        for r in records:
            w.write(r)
            n += 1
    return n
