"""Corpus ingestion, validation and per-group statistics.

A corpus file is JSONL with one document per line::

    {"id": "...", "field": "...", "content": "...", "topic": null, "text": "..."}

Taxonomy values are opaque, case-sensitive strings.
"""

from __future__ import annotations

import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

TOTAL_KEY = "TOTAL"


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


@dataclass(frozen=True)
class Document:
    id: str
    field: str
    content: str
    topic: str | None
    text: str

    @property
    def group(self) -> tuple[str, str, str | None]:
        return (self.field, self.content, self.topic)

    @property
    def nbytes(self) -> int:
        return len(self.text.encode("utf-8"))

    def to_json(self) -> dict:
        return {"id": self.id, "field": self.field, "content": self.content,
                "topic": self.topic, "text": self.text}


def group_key(group: tuple[str, str, str | None]) -> str:
    """Render a taxonomy group as ``field/content/topic``.

    A missing topic renders as ``field/content``.
    """
    fld, content, topic = group
    if topic is None:
        return f"{fld}/{content}"
    return f"{fld}/{content}/{topic}"


def parse_record(obj) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError("record is not a JSON object")
    for key in ("id", "field", "content", "text"):
        if not isinstance(obj.get(key), str):
            raise CorpusError(f"missing or non-string key {key!r}")
    topic = obj.get("topic")
    if topic is not None and not isinstance(topic, str):
        raise CorpusError("topic must be a string or null")
    if not obj["id"]:
        raise CorpusError("empty id")
    if not obj["text"].strip():
        raise CorpusError("empty text")
    return Document(obj["id"], obj["field"], obj["content"], topic, obj["text"])


@dataclass
class LoadStats:
    loaded: int = 0
    skipped: int = 0


def load_corpus(path: str | os.PathLike, strict: bool = True,
                stats: LoadStats | None = None) -> Iterator[Document]:
    """Stream documents from a JSONL corpus file in file order.

    In lenient mode malformed records are skipped and counted in ``stats``.
    Duplicate ids raise :class:`CorpusError` in both modes.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"corpus file not found: {path}")
    if stats is None:
        stats = LoadStats()
    seen: set[str] = set()
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                doc = parse_record(json.loads(raw.decode("utf-8")))
            except (UnicodeDecodeError, json.JSONDecodeError, CorpusError) as exc:
                if strict:
                    raise CorpusError(f"{path}:{lineno}: {exc}") from exc
                stats.skipped += 1
                logger.warning("skipping malformed record at %s:%d (%s)", path, lineno, exc)
                continue
            if doc.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            stats.loaded += 1
            yield doc


def write_corpus(docs: Iterable[Document], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_json(), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


@dataclass
class GroupStats:
    doc_count: int = 0
    byte_size: int = 0


@dataclass
class CorpusStats:
    groups: dict[tuple[str, str, str | None], GroupStats] = dc_field(default_factory=dict)

    @property
    def doc_count(self) -> int:
        return sum(g.doc_count for g in self.groups.values())

    @property
    def byte_size(self) -> int:
        return sum(g.byte_size for g in self.groups.values())

    def by_key(self) -> dict[str, GroupStats]:
        return {group_key(g): s for g, s in self.groups.items()}

    def merge(self, other: CorpusStats) -> CorpusStats:
        out = CorpusStats({g: GroupStats(s.doc_count, s.byte_size) for g, s in self.groups.items()})
        for g, s in other.groups.items():
            acc = out.groups.setdefault(g, GroupStats())
            acc.doc_count += s.doc_count
            acc.byte_size += s.byte_size
        return out

    def to_json(self) -> dict:
        rows = {group_key(g): {"doc_count": s.doc_count, "byte_size": s.byte_size}
                for g, s in sorted(self.groups.items(), key=lambda kv: group_key(kv[0]))}
        rows[TOTAL_KEY] = {"doc_count": self.doc_count, "byte_size": self.byte_size}
        return rows


def corpus_stats(corpus: Iterable[Document]) -> CorpusStats:
    counts: dict = defaultdict(GroupStats)
    for doc in corpus:
        g = counts[doc.group]
        g.doc_count += 1
        g.byte_size += doc.nbytes
    return CorpusStats(dict(counts))
