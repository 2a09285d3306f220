"""Records, keyword extraction and the per-DPU knowledge index."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

FieldValue = Union[int, float, str]

EXTRACTION_POLICIES = ("tags", "tags+text")
_EXTRACTION_ALIASES = {
    "tags": "tags",
    "explicit-tags": "tags",
    "tags+text": "tags+text",
    "tags-plus-text-field-tokens": "tags+text",
}

RECORD_HEADER_BYTES = 16
NUMERIC_FIELD_BYTES = 8


class RecordError(ValueError):
    """Raised for malformed raw records, duplicate ids and white-noise data."""


def is_field_value(value: object) -> bool:
    # bool is an int subclass but not a field kind
    if isinstance(value, bool):
        return False
    if isinstance(value, float):
        return math.isfinite(value)
    return isinstance(value, (int, str))


def value_kind(value: FieldValue) -> str:
    if isinstance(value, str):
        return "text"
    if isinstance(value, float):
        return "real"
    return "int"


@dataclass
class Record:
    """A registered data portion.

    ``keywords`` is frozen at registration; ``fields`` may be rewritten by
    in-place transforms such as ``scale``.
    """

    id: str
    fields: dict[str, FieldValue]
    keywords: frozenset[str]

    def to_raw(self) -> dict:
        return {"id": self.id, "tags": sorted(self.keywords), "fields": dict(self.fields)}


def normalize_extraction(policy: str) -> str:
    try:
        return _EXTRACTION_ALIASES[policy]
    except KeyError:
        raise ValueError(f"unknown extraction policy {policy!r}") from None


def extract_keywords(raw: Mapping, extraction: str = "tags") -> frozenset[str]:
    policy = normalize_extraction(extraction)
    keywords = {tag.strip().lower() for tag in raw.get("tags", ())}
    if policy == "tags+text":
        for value in raw.get("fields", {}).values():
            if isinstance(value, str):
                keywords.update(token.lower() for token in value.split())
    keywords.discard("")
    return frozenset(keywords)


def _validate_raw(raw: object) -> None:
    if not isinstance(raw, Mapping):
        raise RecordError("malformed raw record: expected an object")
    rid = raw.get("id")
    if not isinstance(rid, str) or not rid:
        raise RecordError("malformed raw record: id must be a non-empty string")
    tags = raw.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise RecordError(f"malformed raw record {rid!r}: tags must be a list of strings")
    fields = raw.get("fields", {})
    if not isinstance(fields, Mapping):
        raise RecordError(f"malformed raw record {rid!r}: fields must be an object")
    for name, value in fields.items():
        if not isinstance(name, str) or not name:
            raise RecordError(f"malformed raw record {rid!r}: bad field name {name!r}")
        if not is_field_value(value):
            raise RecordError(
                f"malformed raw record {rid!r}: field {name!r} must be int, finite real or text"
            )


def register_record(
    raw: Mapping, extraction: str = "tags", seen: set[str] | None = None
) -> Record:
    """Turn a raw ``{"id", "tags", "fields"}`` mapping into a Record.

    ``seen`` is the ingest port's set of already-registered ids; when given,
    duplicates are rejected and the new id is added to it.
    """
    _validate_raw(raw)
    rid = raw["id"]
    if seen is not None and rid in seen:
        raise RecordError(f"duplicate id {rid!r}")
    keywords = extract_keywords(raw, extraction)
    if not keywords:
        # nothing recognizable to index: white-noise data
        raise RecordError(f"empty keyword set for record {rid!r}")
    if seen is not None:
        seen.add(rid)
    return Record(id=rid, fields=dict(raw.get("fields", {})), keywords=keywords)


def register_records(raws: Iterable[Mapping], extraction: str = "tags") -> list[Record]:
    seen: set[str] = set()
    return [register_record(raw, extraction, seen) for raw in raws]


def serialized_size(record: Record) -> int:
    """Wire size of a record in bytes (header, numeric slots, text, keywords)."""
    size = RECORD_HEADER_BYTES
    for value in record.fields.values():
        if isinstance(value, str):
            size += len(value.encode("utf-8"))
        else:
            size += NUMERIC_FIELD_BYTES
    size += sum(len(kw.encode("utf-8")) + 1 for kw in record.keywords)
    return size


def load_dataset(path: str | Path) -> list[dict]:
    """Read a JSON Lines dataset into raw record mappings (blank lines skipped)."""
    path = Path(path)
    raws = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raws.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise RecordError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    return raws


@dataclass
class KnowledgeIndex:
    """Keyword -> local record ids. The digest is the key set."""

    entries: dict[str, set[str]] = field(default_factory=dict)

    @classmethod
    def rebuild(cls, store: Mapping[str, Record]) -> KnowledgeIndex:
        index = cls()
        for record in store.values():
            index.add(record)
        return index

    def add(self, record: Record) -> None:
        for kw in record.keywords:
            self.entries.setdefault(kw, set()).add(record.id)

    @property
    def digest(self) -> frozenset[str]:
        return frozenset(self.entries)

    def lookup(self, keyword: str) -> set[str]:
        return self.entries.get(keyword, set())
