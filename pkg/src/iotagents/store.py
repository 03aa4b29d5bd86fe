"""Content-addressed file store for sessions, datasets, and results.

One record per file; ids are the SHA-256 of the canonical payload, so
identical values collapse to one record and writes are idempotent.
Writes go through a temp file plus atomic rename.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
import uuid
from pathlib import Path

import numpy as np

RECORD_VERSION = 1

_REGISTRY: dict[str, type] = {}


class StoreError(RuntimeError):
    pass


class NotFoundError(StoreError):
    pass


class CorruptRecordError(StoreError):
    pass


def register_record_type(cls) -> type:
    """Make a dataclass storable; usable as a decorator."""
    _REGISTRY[cls.__name__] = cls
    return cls


def to_jsonable(value):
    if isinstance(value, np.ndarray):
        return {"__kind__": "ndarray", "dtype": str(value.dtype),
                "data": value.tolist()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (frozenset, set)):
        return {"__kind__": "set", "items": sorted(to_jsonable(v) for v in value)}
    if isinstance(value, tuple):
        return {"__kind__": "tuple", "items": [to_jsonable(v) for v in value]}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        name = type(value).__name__
        if name not in _REGISTRY:
            raise StoreError(f"unregistered record type: {name}")
        return {
            "__kind__": "record",
            "type": name,
            "fields": {
                f.name: to_jsonable(getattr(value, f.name))
                for f in dataclasses.fields(value)
            },
        }
    if isinstance(value, dict):
        if any(not isinstance(k, str) for k in value):
            return {
                "__kind__": "kvlist",
                "items": [[to_jsonable(k), to_jsonable(v)] for k, v in value.items()],
            }
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [to_jsonable(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise StoreError(f"unserializable value of type {type(value).__name__}")


def from_jsonable(value):
    if isinstance(value, dict):
        kind = value.get("__kind__")
        if kind == "ndarray":
            return np.array(value["data"], dtype=value["dtype"])
        if kind == "set":
            return frozenset(from_jsonable(v) for v in value["items"])
        if kind == "tuple":
            return tuple(from_jsonable(v) for v in value["items"])
        if kind == "kvlist":
            return {from_jsonable(k): from_jsonable(v) for k, v in value["items"]}
        if kind == "record":
            cls = _REGISTRY.get(value["type"])
            if cls is None:
                raise CorruptRecordError(f"unknown record type {value['type']!r}")
            fields = {k: from_jsonable(v) for k, v in value["fields"].items()}
            return cls(**fields)
        return {k: from_jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [from_jsonable(v) for v in value]
    return value


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


class FileStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, record_id: str) -> Path:
        return self.root / f"{record_id}.json"

    def store(self, value) -> str:
        payload = canonical_json(to_jsonable(value))
        record_id = hashlib.sha256(payload.encode()).hexdigest()
        target = self._path(record_id)
        if target.exists():
            return record_id
        envelope = canonical_json(
            {
                "version": RECORD_VERSION,
                "checksum": record_id,
                "payload": payload,
            }
        )
        fd, tmp = tempfile.mkstemp(
            dir=self.root, prefix=f".{uuid.uuid4().hex}-", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(envelope)
            os.replace(tmp, target)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return record_id

    def load(self, record_id: str):
        path = self._path(record_id)
        if not path.exists():
            raise NotFoundError(f"no record {record_id!r}")
        try:
            envelope = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptRecordError(f"record {record_id!r} unreadable: {exc}") from exc
        if envelope.get("version") != RECORD_VERSION:
            raise CorruptRecordError(f"record {record_id!r}: bad version")
        payload = envelope.get("payload", "")
        digest = hashlib.sha256(payload.encode()).hexdigest()
        if digest != envelope.get("checksum") or digest != record_id:
            raise CorruptRecordError(f"record {record_id!r}: checksum mismatch")
        return from_jsonable(json.loads(payload))

    def ids(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def __contains__(self, record_id: str) -> bool:
        return self._path(record_id).exists()
