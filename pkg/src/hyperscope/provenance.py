"""Append-only, seed-stamped provenance log.

Every interaction, feedback decision, and model event appends one record
carrying its full parameters (seeds included), a parent pointer (branches
arise from undo), and a content digest. Model outputs are stored as digests
plus whatever is needed to regenerate them - determinism of the engine makes
the log replayable bit-exactly. The file form is line-delimited JSON (one
header line, then one event per line) so appends are safe and diffs stay
readable; records are flushed to disk before the triggering operation's
result is surfaced.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

FORMAT = "hyperscope-provenance"
VERSION = 1

EVENT_KINDS = (
    "ingest",
    "train",
    "reorder",
    "hierarchy-edit",
    "filter-change",
    "search",
    "feedback-preview",
    "feedback-accept",
    "feedback-reject",
    "annotation",
    "marking",
    "undo",
)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest_payload(kind: str, parent_seq: int | None, payload: dict) -> str:
    body = canonical_json({"kind": kind, "parent": parent_seq, "payload": payload})
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def digest_array(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class ProvenanceEvent:
    seq: int
    wall_time: float
    session_id: str
    kind: str
    payload: dict
    parent_seq: int | None
    digest: str

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "wall_time": self.wall_time,
            "session": self.session_id,
            "kind": self.kind,
            "payload": self.payload,
            "parent": self.parent_seq,
            "digest": self.digest,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ProvenanceEvent":
        return cls(
            seq=rec["seq"],
            wall_time=rec["wall_time"],
            session_id=rec["session"],
            kind=rec["kind"],
            payload=rec["payload"],
            parent_seq=rec["parent"],
            digest=rec["digest"],
        )


class ProvenanceLog:
    """Ordered events forming a tree (one root, branches via parent links).

    Optionally file-backed: every record is appended, flushed, and fsynced
    before the call returns. The log never loses events; undo appends an
    ``undo`` marker whose payload names the sequence number the state
    rewinds to.
    """

    def __init__(self, path: str | Path | None = None, backend: str = ""):
        self.path = Path(path) if path is not None else None
        self.backend = backend
        self.events: list[ProvenanceEvent] = []
        self._by_seq: dict[int, ProvenanceEvent] = {}
        self._fh: IO[str] | None = None
        if self.path is not None:
            if self.path.exists() and self.path.stat().st_size > 0:
                self._load_file()
                self._fh = open(self.path, "a", encoding="utf-8")
            else:
                self._fh = open(self.path, "a", encoding="utf-8")
                header = {"format": FORMAT, "version": VERSION, "backend": backend}
                self._fh.write(canonical_json(header) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())

    def _load_file(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty provenance file")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT:
            raise ValueError(f"not a provenance log: format={header.get('format')!r}")
        if header.get("version") != VERSION:
            raise ValueError(
                f"incompatible provenance version {header.get('version')!r}, "
                f"engine supports {VERSION}"
            )
        self.backend = header.get("backend", "")
        for ln in lines[1:]:
            event = ProvenanceEvent.from_record(json.loads(ln))
            self.events.append(event)
            self._by_seq[event.seq] = event

    @classmethod
    def load(cls, path: str | Path) -> "ProvenanceLog":
        log = cls(path)
        log.verify()
        return log

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self) -> int:
        return len(self.events)

    def event(self, seq: int) -> ProvenanceEvent:
        if seq not in self._by_seq:
            raise KeyError(f"unknown event sequence number {seq}")
        return self._by_seq[seq]

    def record(
        self,
        kind: str,
        payload: dict,
        parent_seq: int | None,
        session_id: str = "",
    ) -> ProvenanceEvent:
        """Append one event; durable (flush+fsync) before returning."""
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if parent_seq is None:
            if self.events:
                raise ValueError("log already has a root; parent required")
        elif parent_seq not in self._by_seq:
            raise ValueError(f"parent event {parent_seq} does not exist")
        seq = self.events[-1].seq + 1 if self.events else 1
        event = ProvenanceEvent(
            seq=seq,
            wall_time=time.time(),
            session_id=session_id,
            kind=kind,
            payload=payload,
            parent_seq=parent_seq,
            digest=digest_payload(kind, parent_seq, payload),
        )
        if self._fh is not None:
            self._fh.write(canonical_json(event.to_record()) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self.events.append(event)
        self._by_seq[seq] = event
        return event

    def verify(self) -> None:
        """Recompute every digest and check parent links (integrity)."""
        for event in self.events:
            expected = digest_payload(event.kind, event.parent_seq, event.payload)
            if event.digest != expected:
                raise ValueError(f"digest mismatch at event {event.seq}")
            if event.parent_seq is not None and event.parent_seq not in self._by_seq:
                raise ValueError(f"event {event.seq} has unknown parent {event.parent_seq}")

    def effective_chain(self, up_to: int) -> list[ProvenanceEvent]:
        """Linear event script producing the state at ``up_to``.

        Walks parent links from the target to the root; an undo marker
        redirects the walk to the event it rewound to, so undone segments
        drop out of the script.
        """
        script: list[ProvenanceEvent] = []
        cursor: int | None = up_to
        while cursor is not None:
            event = self.event(cursor)
            if event.kind == "undo":
                cursor = event.payload.get("undone_to")
                continue
            script.append(event)
            cursor = event.parent_seq
        script.reverse()
        return script

    def heads(self) -> list[int]:
        """Sequence numbers with no children (tips of all branches)."""
        parents = {e.parent_seq for e in self.events if e.parent_seq is not None}
        return [e.seq for e in self.events if e.seq not in parents]
