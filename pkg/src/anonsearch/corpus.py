"""Tokenisation, inverted index and unranked boolean retrieval.

A query returns every document containing all of its words; there is no
ranking. The index stands in for the search engine.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

INDEX_MAGIC = "ANONIDX"
INDEX_VERSION = 1

_WORD_RE = re.compile(r"[^\W_]+")


class IngestionError(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    internal_id: int
    external_id: str
    text: str


@dataclass(frozen=True)
class DocSet:
    """Sorted, duplicate-free document ids."""

    ids: tuple[int, ...] = ()

    @classmethod
    def of(cls, ids: Iterable[int]) -> "DocSet":
        return cls(tuple(sorted(set(int(i) for i in ids))))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)

    def __contains__(self, doc_id: object) -> bool:
        pos = bisect.bisect_left(self.ids, doc_id)
        return pos < len(self.ids) and self.ids[pos] == doc_id

    def __and__(self, other: "DocSet") -> "DocSet":
        return DocSet(tuple(sorted(set(self.ids).intersection(other.ids))))

    def __or__(self, other: "DocSet") -> "DocSet":
        return DocSet(tuple(sorted(set(self.ids).union(other.ids))))

    def issubset(self, other: "DocSet") -> bool:
        return set(self.ids).issubset(other.ids)


@dataclass(frozen=True, eq=False)
class InvertedIndex:
    postings: dict[str, tuple[int, ...]]
    doc_count: int
    documents: tuple[Document, ...] = field(default=(), repr=False)

    def __contains__(self, token: object) -> bool:
        return token in self.postings

    def vocabulary(self) -> list[str]:
        return sorted(self.postings)

    def serialize(self) -> str:
        lines = [f"{INDEX_MAGIC} {INDEX_VERSION} {self.doc_count}"]
        for token in sorted(self.postings):
            lines.append(token + "\t" + ",".join(map(str, self.postings[token])))
        lines.append("---")
        for doc in self.documents:
            lines.append(json.dumps({"id": doc.external_id, "text": doc.text}, ensure_ascii=False))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 3 or header[0] != INDEX_MAGIC:
                raise IndexFormatError(f"{path}: missing {INDEX_MAGIC} header")
            if header[1] != str(INDEX_VERSION):
                raise IndexFormatError(f"{path}: unsupported index version {header[1]}")
            doc_count = int(header[2])
            postings: dict[str, tuple[int, ...]] = {}
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if line == "---":
                    break
                token, sep, ids = line.partition("\t")
                if not sep:
                    raise IndexFormatError(f"{path}: line {lineno}: expected <token><TAB><ids>")
                postings[token] = tuple(int(x) for x in ids.split(",")) if ids else ()
            docs = []
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    docs.append(Document(len(docs), obj["id"], obj["text"]))
        if docs and len(docs) != doc_count:
            raise IndexFormatError(f"{path}: header says {doc_count} documents, table has {len(docs)}")
        return cls(postings, doc_count, tuple(docs))


def read_corpus(path: str | Path) -> Iterator[Document]:
    """Stream documents from JSON Lines with ``id`` and ``text`` fields."""
    with open(path, encoding="utf-8") as fh:
        internal = 0
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ext, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise IngestionError(f"{path}: line {lineno}: bad corpus record ({exc})") from None
            if not isinstance(ext, str) or not isinstance(text, str):
                raise IngestionError(f"{path}: line {lineno}: 'id' and 'text' must be strings")
            yield Document(internal, ext, text)
            internal += 1


def build_index(docs: Iterable[Document | tuple[str, str]]) -> InvertedIndex:
    """Build postings from a document stream.

    Plain ``(external_id, text)`` pairs are accepted and numbered in order.
    """
    postings: dict[str, list[int]] = {}
    stored: list[Document] = []
    seen: set[str] = set()
    for item in docs:
        if isinstance(item, Document):
            ext, text = item.external_id, item.text
        else:
            ext, text = item
        if ext in seen:
            raise IngestionError(f"duplicate document id {ext!r}")
        seen.add(ext)
        doc_id = len(stored)
        stored.append(Document(doc_id, ext, text))
        for token in set(tokenize(text)):
            postings.setdefault(token, []).append(doc_id)
    return InvertedIndex({t: tuple(ids) for t, ids in postings.items()}, len(stored), tuple(stored))


def retrieve(index: InvertedIndex, term: str) -> DocSet:
    return DocSet(index.postings.get(term, ()))


def retrieve_conjunctive(index: InvertedIndex, terms: Sequence[str]) -> DocSet:
    if not terms:
        raise ValueError("conjunctive retrieval needs at least one term")
    lists = sorted((index.postings.get(t, ()) for t in terms), key=len)
    result = set(lists[0])
    for ids in lists[1:]:
        if not result:
            break
        result.intersection_update(ids)
    return DocSet(tuple(sorted(result)))
