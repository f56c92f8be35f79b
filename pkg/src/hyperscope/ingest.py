"""Corpus ingestion: timestamped documents plus a keyword ontology become the
explicit/implicit temporal hypergraph pair and a per-cell document index.

Documents arrive as line-delimited JSON records ``{id, author, timestamp,
text, category?}`` (ISO-8601 UTC timestamps). The ontology is a JSON object
mapping topic name to a keyword array; topic assignment is case-insensitive
whole-word keyword matching (tokens split on non-alphanumerics), which keeps
the keyword/content zoom levels exactly backed by raw documents. Authors
become nodes (first-appearance order), topics become implicit hyperedges
(ontology order), forum categories become explicit hyperedges.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .hypergraph import TemporalHypergraph, TimeIndex, build_incidence

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

BINNINGS = ("year", "month", "week")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric characters."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    author: str
    timestamp: datetime
    text: str
    category: str | None = None


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    message: str


@dataclass(frozen=True)
class Ontology:
    """Ordered topics, each a nonempty lowercase keyword list."""

    topics: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.topics]
        if len(names) != len(set(names)):
            raise ValueError("topic names must be unique")
        for name, keywords in self.topics:
            if not name:
                raise ValueError("topic names must be nonempty")
            if not keywords:
                raise ValueError(f"topic {name!r} has no keywords")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[str]]) -> "Ontology":
        topics = tuple(
            (name, tuple(str(k).lower() for k in keywords))
            for name, keywords in mapping.items()
        )
        return cls(topics)

    @classmethod
    def load(cls, path: str | Path) -> "Ontology":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.topics]


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(str(raw).replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_corpus(lines: Iterable[str]) -> tuple[list[RawDocument], list[ParseIssue]]:
    """Parse line-delimited JSON document records.

    Malformed lines are collected as issues with their 1-based line number
    rather than aborting; parsing only fails outright when every line of a
    nonempty input is bad. An empty input yields an "empty corpus" warning.
    """
    docs: list[RawDocument] = []
    issues: list[ParseIssue] = []
    seen_ids: set[str] = set()
    total = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            rec = json.loads(line)
            doc_id = str(rec["id"])
            author = str(rec.get("author", "")).strip()
            if not author:
                raise ValueError("missing author")
            ts = _parse_timestamp(rec["timestamp"])
            text = str(rec.get("text", ""))
            category = rec.get("category")
            if doc_id in seen_ids:
                raise ValueError(f"duplicate document id {doc_id!r}")
        except (KeyError, ValueError, TypeError) as exc:
            reason = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            issues.append(ParseIssue(line_no, reason))
            continue
        seen_ids.add(doc_id)
        docs.append(
            RawDocument(doc_id, author, ts, text, None if category is None else str(category))
        )
    if total == 0:
        warnings.warn("empty corpus", stacklevel=2)
    elif not docs:
        raise ValueError(
            f"all {total} corpus lines failed to parse; first: "
            f"line {issues[0].line_no}: {issues[0].message}"
        )
    return docs, issues


def _bin_key(ts: datetime, binning: str):
    if binning == "year":
        return (ts.year,)
    if binning == "month":
        return (ts.year, ts.month)
    iso = ts.isocalendar()
    return (iso[0], iso[1])


def _bin_label(key, binning: str) -> str:
    if binning == "year":
        return f"{key[0]:04d}"
    if binning == "month":
        return f"{key[0]:04d}-{key[1]:02d}"
    return f"{key[0]:04d}-W{key[1]:02d}"


def _bin_range(lo: datetime, hi: datetime, binning: str) -> list:
    """Contiguous bin keys covering [lo, hi], including empty bins."""
    if binning == "year":
        return [(y,) for y in range(lo.year, hi.year + 1)]
    if binning == "month":
        keys = []
        y, mth = lo.year, lo.month
        while (y, mth) <= (hi.year, hi.month):
            keys.append((y, mth))
            y, mth = (y + 1, 1) if mth == 12 else (y, mth + 1)
        return keys
    keys = []
    cursor = lo - timedelta(days=lo.isocalendar()[2] - 1)  # Monday of lo's week
    last = _bin_key(hi, "week")
    while True:
        key = _bin_key(cursor, "week")
        keys.append(key)
        if key == last:
            return keys
        cursor += timedelta(weeks=1)


@dataclass
class CorpusIndex:
    """Bidirectional id maps plus the raw-document backing of every nonzero
    implicit cell; also carries the corpus df table for tf-idf ranking."""

    documents: tuple[RawDocument, ...]
    node_ids: dict[str, int]
    edge_ids: dict[str, int]
    cell_docs: dict[tuple[int, int, int], tuple[int, ...]]
    doc_freq: dict[str, int] = field(default_factory=dict)

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    def documents_for_cell(self, node: int, edge: int, t: int) -> list[RawDocument]:
        return [self.documents[i] for i in self.cell_docs.get((node, edge, t), ())]

    def cells_for_document(self, position: int) -> list[tuple[int, int, int]]:
        return sorted(k for k, ids in self.cell_docs.items() if position in ids)


def build_temporal_hypergraphs(
    docs: list[RawDocument], ont: Ontology, binning: str = "year"
) -> tuple[TemporalHypergraph, TemporalHypergraph, CorpusIndex]:
    """Assemble the explicit/implicit hypergraph pair over calendar bins.

    Implicit cell (author, topic, bin) is 1 iff the author wrote at least one
    document in that bin containing a whole-word match of one of the topic's
    keywords; explicit cells come from forum-category labels the same way.
    Both hypergraphs share the node set. Deterministic for identical inputs.
    """
    if binning not in BINNINGS:
        raise ValueError(f"binning must be one of {BINNINGS}, got {binning!r}")
    if not docs:
        raise ValueError("cannot build hypergraphs from an empty corpus")

    node_ids: dict[str, int] = {}
    for doc in docs:
        node_ids.setdefault(doc.author, len(node_ids))
    lo = min(d.timestamp for d in docs)
    hi = max(d.timestamp for d in docs)
    keys = _bin_range(lo, hi, binning)
    key_to_t = {k: t for t, k in enumerate(keys)}
    times = tuple(TimeIndex(t, _bin_label(k, binning)) for t, k in enumerate(keys))

    edge_ids = {name: e for e, name in enumerate(ont.names)}
    category_ids: dict[str, int] = {}
    for doc in docs:
        if doc.category is not None:
            category_ids.setdefault(doc.category, len(category_ids))

    n, m, n_t = len(node_ids), len(edge_ids), len(keys)
    implicit_cells: dict[int, list[tuple[int, int, float]]] = {t: [] for t in range(n_t)}
    explicit_cells: dict[int, list[tuple[int, int, float]]] = {t: [] for t in range(n_t)}
    cell_docs: dict[tuple[int, int, int], list[int]] = {}
    doc_freq: Counter = Counter()
    matched_any = False

    for pos, doc in enumerate(docs):
        v = node_ids[doc.author]
        t = key_to_t[_bin_key(doc.timestamp, binning)]
        tokens = tokenize(doc.text)
        token_set = set(tokens)
        doc_freq.update(token_set)
        for name, keywords in ont.topics:
            if _topic_matches(keywords, tokens, token_set):
                matched_any = True
                e = edge_ids[name]
                implicit_cells[t].append((v, e, 1.0))
                cell_docs.setdefault((v, e, t), []).append(pos)
        if doc.category is not None:
            explicit_cells[t].append((v, category_ids[doc.category], 1.0))

    if not matched_any:
        raise ValueError("unusable ontology: no topic keyword matches any document")

    implicit = TemporalHypergraph(
        node_labels=tuple(node_ids),
        edge_labels=tuple(edge_ids),
        matrices=tuple(build_incidence(implicit_cells[t], n, m) for t in range(n_t)),
        times=times,
        role="implicit",
    )
    explicit = TemporalHypergraph(
        node_labels=tuple(node_ids),
        edge_labels=tuple(category_ids),
        matrices=tuple(
            build_incidence(explicit_cells[t], n, len(category_ids)) for t in range(n_t)
        ),
        times=times,
        role="explicit",
    )
    index = CorpusIndex(
        documents=tuple(docs),
        node_ids=node_ids,
        edge_ids=edge_ids,
        cell_docs={k: tuple(v) for k, v in cell_docs.items()},
        doc_freq=dict(doc_freq),
    )
    return explicit, implicit, index


def _topic_matches(keywords: tuple[str, ...], tokens: list[str], token_set: set[str]) -> bool:
    for kw in keywords:
        parts = tokenize(kw)
        if not parts:
            continue
        if len(parts) == 1:
            if parts[0] in token_set:
                return True
        else:  # multi-word keyword: contiguous token run
            k = len(parts)
            if any(tokens[i : i + k] == parts for i in range(len(tokens) - k + 1)):
                return True
    return False


def rank_keywords(
    index: CorpusIndex, doc_positions: list[int], k: int
) -> list[tuple[str, float]]:
    """Top-k terms of the given documents by tf-idf against the corpus.

    tf is the raw term count over the documents; idf uses the smoothed form
    ln((1+N)/(1+df)) + 1. Ties break lexicographically.
    """
    if not doc_positions or k <= 0:
        return []
    tf: Counter = Counter()
    for pos in doc_positions:
        tf.update(tokenize(index.documents[pos].text))
    n_docs = index.n_documents
    scored = [
        (term, count * (math.log((1 + n_docs) / (1 + index.doc_freq.get(term, 0))) + 1.0))
        for term, count in tf.items()
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def extract_keywords(
    index: CorpusIndex, node: int, edge: int, t: int, k: int
) -> list[tuple[str, float]]:
    """Top-k tf-idf terms of one cell's documents; empty cell yields []."""
    return rank_keywords(index, list(index.cell_docs.get((node, edge, t), ())), k)
