"""The experience memory: persistent records with corrections and top-k search.

Every solved (or failed-and-fixed) interaction lives here as an
ExperienceRecord. Records move through a small status machine:

    insert:        unverified | correct | pending-review
    set_status:    unverified -> correct
                   unverified -> pending-review
                   pending-review -> rejected
    correction:    unverified -> corrected
                   pending-review -> corrected

Only ``correct`` and ``corrected`` records are retrievable by default
search. Corrections keep the record's embedding (the problem never
changes) and push the previous solution onto ``revisions``, so the audit
trail of wrong attempts is never lost.

Persistence is an append-only event log (one canonical JSON object per
line) with snapshot compaction. Floats are serialized with 9 significant
digits, and embeddings are quantized to that grid at insert time, so the
in-memory store, the log, and any snapshot hold bit-identical vectors and
replay can never drift.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding import Embedder, EmbedderConfig, format_component, quantize
from .errors import (
    CorruptSnapshot,
    DimensionMismatch,
    DuplicateProblem,
    EmptyText,
    FingerprintMismatch,
    IllegalTransition,
    NotFound,
    StorageFailure,
    StoreMissing,
    VersionMismatch,
)

STATUSES = ("unverified", "correct", "pending-review", "corrected", "rejected")
RETRIEVABLE_STATUSES = frozenset({"correct", "corrected"})
LEGAL_INITIAL_STATUSES = frozenset({"unverified", "correct", "pending-review"})
SET_STATUS_TRANSITIONS = frozenset(
    {
        ("unverified", "correct"),
        ("unverified", "pending-review"),
        ("pending-review", "rejected"),
    }
)
CORRECTABLE_STATUSES = frozenset({"unverified", "pending-review"})
PROVENANCES = ("model", "refiner-model", "human")

FORMAT_VERSION = 1
_EVENTS_FILE = "events.log"
_META_FILE = "meta.json"
_SNAPSHOT_FILE = "snapshot.jsonl"

_RECORD_FIELDS = (
    "id",
    "problem",
    "response",
    "reasoning",
    "answer",
    "gold_answer",
    "embedding",
    "status",
    "provenance",
    "task_meta",
    "created_at",
    "updated_at",
    "revisions",
)


def normalize_problem(text: str) -> str:
    """Whitespace-normalized problem text, the dedup key."""
    return " ".join(text.split())


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def canonical_json(obj: object) -> str:
    """JSON with insertion-ordered keys and floats at 9 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_component(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{canonical_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (np.floating,)):
        return format_component(float(obj))
    if isinstance(obj, (np.integer,)):
        return str(int(obj))
    raise TypeError(f"cannot canonicalize {type(obj)!r}")


@dataclass(frozen=True)
class Revision:
    """One superseded solution, retained when a correction lands."""

    response: str
    reasoning: str
    answer: str
    provenance: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "reasoning": self.reasoning,
            "answer": self.answer,
            "provenance": self.provenance,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Revision":
        return cls(d["response"], d["reasoning"], d["answer"], d["provenance"], d["timestamp"])


@dataclass
class ExperienceRecord:
    """One logged interaction plus its lifecycle state."""

    id: str
    problem: str
    response: str
    reasoning: str
    answer: str
    gold_answer: str | None
    embedding: np.ndarray
    status: str
    provenance: str
    task_meta: dict
    created_at: str
    updated_at: str
    revisions: list[Revision] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "problem": self.problem,
            "response": self.response,
            "reasoning": self.reasoning,
            "answer": self.answer,
            "gold_answer": self.gold_answer,
            "embedding": [float(x) for x in self.embedding],
            "status": self.status,
            "provenance": self.provenance,
            "task_meta": self.task_meta,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "revisions": [r.to_dict() for r in self.revisions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperienceRecord":
        return cls(
            id=d["id"],
            problem=d["problem"],
            response=d["response"],
            reasoning=d["reasoning"],
            answer=d["answer"],
            gold_answer=d.get("gold_answer"),
            embedding=np.asarray(d["embedding"], dtype=np.float64),
            status=d["status"],
            provenance=d["provenance"],
            task_meta=dict(d.get("task_meta") or {}),
            created_at=d["created_at"],
            updated_at=d["updated_at"],
            revisions=[Revision.from_dict(r) for r in d.get("revisions", [])],
        )


@dataclass(frozen=True)
class RetrievalResult:
    record_id: str
    score: float
    rank: int


class MemoryStore:
    """Indexed collection of experience records with durable history.

    One handle may be shared across threads: a single lock serializes
    mutations, and search holds it only long enough to score one snapshot
    of the matrix.
    """

    def __init__(
        self,
        config: EmbedderConfig,
        path: str | Path | None = None,
        *,
        create: bool = True,
        embedder: Embedder | None = None,
        fsync: bool = True,
    ) -> None:
        self.config = config
        self.embedder = embedder or Embedder(config)
        self.path = Path(path) if path is not None else None
        self._fsync = fsync
        self._lock = threading.RLock()
        self._records: dict[str, ExperienceRecord] = {}
        self._insert_order: list[str] = []
        self._problem_keys: dict[str, str] = {}  # normalized problem -> id (non-rejected)
        self._seq = 0
        self._matrix: np.ndarray | None = None
        self._row_norms: np.ndarray | None = None
        self._matrix_ids: list[str] = []
        self._tie_order: np.ndarray | None = None
        self._dirty = True
        self._log_handle = None
        self.reads = 0
        if self.path is not None:
            self._open_dir(create=create)

    # ------------------------------------------------------------------
    # Directory persistence

    def _open_dir(self, create: bool) -> None:
        assert self.path is not None
        meta_path = self.path / _META_FILE
        if not meta_path.exists():
            if not create:
                raise StoreMissing(f"no store at {self.path}")
            try:
                self.path.mkdir(parents=True, exist_ok=True)
                meta = {
                    "version": FORMAT_VERSION,
                    "dim": self.config.dim,
                    "fingerprint": self.config.fingerprint(),
                }
                meta_path.write_text(canonical_json(meta) + "\n", encoding="utf-8")
            except OSError as exc:
                raise StorageFailure(f"cannot initialize store at {self.path}: {exc}") from exc
        else:
            try:
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
            except (OSError, ValueError) as exc:
                raise StorageFailure(f"cannot read store meta: {exc}") from exc
            if meta.get("version") != FORMAT_VERSION:
                raise VersionMismatch(f"store version {meta.get('version')} not supported")
            if meta.get("fingerprint") != self.config.fingerprint():
                raise FingerprintMismatch(
                    f"store was built with embedder {meta.get('fingerprint')}, "
                    f"config is {self.config.fingerprint()}"
                )
        snap_path = self.path / _SNAPSHOT_FILE
        if snap_path.exists():
            self._load_snapshot_file(snap_path)
        log_path = self.path / _EVENTS_FILE
        if log_path.exists():
            self.replay_events(log_path.read_text(encoding="utf-8"))
        try:
            self._log_handle = open(log_path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot open event log: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            if self._log_handle is not None:
                self._log_handle.close()
                self._log_handle = None

    def __enter__(self) -> "MemoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _append_event(self, kind: str, record: ExperienceRecord) -> None:
        """Write one event line durably before the mutation becomes visible."""
        if self._log_handle is None:
            return
        payload = record.to_dict()
        payload["event"] = kind
        line = canonical_json(payload) + "\n"
        try:
            self._log_handle.write(line)
            self._log_handle.flush()
            if self._fsync:
                os.fsync(self._log_handle.fileno())
        except OSError as exc:
            raise StorageFailure(f"event log write failed: {exc}") from exc

    def replay_events(self, text: str) -> int:
        """Apply event lines to in-memory state; stops at a torn tail line.

        Returns the number of events applied. A line that fails to parse is
        treated as an interrupted final write and everything from it on is
        ignored, so a prefix of the log always yields a consistent store.
        """
        applied = 0
        for raw in text.splitlines():
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw)
                kind = payload.pop("event")
                record = ExperienceRecord.from_dict(payload)
            except (ValueError, KeyError, TypeError):
                break
            self._apply_record_state(kind, record)
            applied += 1
        return applied

    def _apply_record_state(self, kind: str, record: ExperienceRecord) -> None:
        if record.id not in self._records:
            self._insert_order.append(record.id)
            self._problem_keys[normalize_problem(record.problem)] = record.id
            self._seq = max(self._seq, _seq_of(record.id))
        self._records[record.id] = record
        if record.status == "rejected":
            self._problem_keys.pop(normalize_problem(record.problem), None)
        self._dirty = True

    # ------------------------------------------------------------------
    # Mutations

    def insert(
        self,
        problem: str,
        response: str,
        reasoning: str,
        answer: str,
        gold_answer: str | None = None,
        status: str = "unverified",
        provenance: str = "model",
        task_meta: dict | None = None,
    ) -> str:
        with self._lock:
            if status not in LEGAL_INITIAL_STATUSES:
                raise IllegalTransition(f"{status!r} is not a legal initial status")
            key = normalize_problem(problem)
            if not key:
                raise EmptyText("problem text is empty")
            if key in self._problem_keys:
                raise DuplicateProblem(f"problem already stored as {self._problem_keys[key]}")
            vec = quantize(self.embedder.embed(problem))
            now = _utc_now()
            self._seq += 1
            record = ExperienceRecord(
                id=f"r{self._seq:06d}",
                problem=problem,
                response=response,
                reasoning=reasoning,
                answer=answer,
                gold_answer=gold_answer,
                embedding=vec,
                status=status,
                provenance=provenance,
                task_meta=dict(task_meta or {}),
                created_at=now,
                updated_at=now,
            )
            self._append_event("insert", record)
            self._records[record.id] = record
            self._insert_order.append(record.id)
            self._problem_keys[key] = record.id
            self._dirty = True
            return record.id

    def apply_correction(
        self,
        record_id: str,
        corrected_response: str,
        corrected_reasoning: str,
        corrected_answer: str,
        provenance: str,
    ) -> int:
        with self._lock:
            record = self._records.get(record_id)
            if record is None:
                raise NotFound(record_id)
            if record.status not in CORRECTABLE_STATUSES:
                raise IllegalTransition(f"cannot correct a record in status {record.status!r}")
            revisions = record.revisions + [
                Revision(
                    response=record.response,
                    reasoning=record.reasoning,
                    answer=record.answer,
                    provenance=record.provenance,
                    timestamp=record.updated_at,
                )
            ]
            updated = ExperienceRecord(
                id=record.id,
                problem=record.problem,
                response=corrected_response,
                reasoning=corrected_reasoning,
                answer=corrected_answer,
                gold_answer=record.gold_answer,
                embedding=record.embedding,
                status="corrected",
                provenance=provenance,
                task_meta=record.task_meta,
                created_at=record.created_at,
                updated_at=_utc_now(),
                revisions=revisions,
            )
            self._append_event("correction", updated)
            self._records[record_id] = updated
            self._dirty = True
            return len(revisions)

    def set_status(self, record_id: str, new_status: str) -> None:
        with self._lock:
            record = self._records.get(record_id)
            if record is None:
                raise NotFound(record_id)
            if (record.status, new_status) not in SET_STATUS_TRANSITIONS:
                raise IllegalTransition(f"{record.status} -> {new_status} is not allowed")
            updated = replace(record, status=new_status, updated_at=_utc_now())
            self._append_event("status", updated)
            self._records[record_id] = updated
            if new_status == "rejected":
                self._problem_keys.pop(normalize_problem(record.problem), None)
            self._dirty = True

    # ------------------------------------------------------------------
    # Reads

    def __len__(self) -> int:
        return len(self._records)

    def get(self, record_id: str) -> ExperienceRecord:
        with self._lock:
            record = self._records.get(record_id)
            if record is None:
                raise NotFound(record_id)
            return record

    def find_problem(self, problem: str) -> ExperienceRecord | None:
        """Non-rejected record holding exactly this (normalized) problem text."""
        with self._lock:
            rid = self._problem_keys.get(normalize_problem(problem))
            return self._records.get(rid) if rid else None

    def list_records(self, status: str | None = None, newest_first: bool = True) -> list[ExperienceRecord]:
        with self._lock:
            records = list(self._records.values())
        if status is not None:
            records = [r for r in records if r.status == status]
        records.sort(key=lambda r: (r.created_at, r.id), reverse=newest_first)
        return records

    def pending_queue(self) -> list[ExperienceRecord]:
        """Review queue, oldest first."""
        return self.list_records(status="pending-review", newest_first=False)

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {status: 0 for status in STATUSES}
            for record in self._records.values():
                out[record.status] += 1
            return out

    def embed_text(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    # ------------------------------------------------------------------
    # Search

    def _rebuild_index(self) -> None:
        ids = list(self._insert_order)
        if ids:
            self._matrix = np.stack([self._records[rid].embedding for rid in ids])
        else:
            self._matrix = np.zeros((0, self.config.dim), dtype=np.float64)
        # Quantized vectors are unit length only to ~1e-9; real cosine needs
        # the exact row norms.
        self._row_norms = np.linalg.norm(self._matrix, axis=1) if ids else np.zeros(0)
        self._matrix_ids = ids
        # Tie rank: earlier created_at wins, then lexicographic id.
        by_tie = sorted(range(len(ids)), key=lambda i: (self._records[ids[i]].created_at, ids[i]))
        order = np.empty(len(ids), dtype=np.int64)
        for rank, idx in enumerate(by_tie):
            order[idx] = rank
        self._tie_order = order
        self._dirty = False

    def search(
        self,
        query: np.ndarray,
        k: int,
        filter: Iterable[str] = RETRIEVABLE_STATUSES,
        min_score: float = -1.0,
    ) -> list[RetrievalResult]:
        """Exact cosine top-k over records whose status is in ``filter``.

        Results are sorted by score descending; ties go to the record with
        the earlier created_at, then the lexicographically smaller id. Two
        scores tie when they agree on the canonical 9-significant-digit
        grid: structurally identical overlaps produce mathematically equal
        cosines, and ordering must not depend on which summation order a
        particular BLAS happened to use.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        statuses = frozenset(filter)
        q = np.asarray(query, dtype=np.float64)
        with self._lock:
            self.reads += 1
            if q.ndim != 1 or q.shape[0] != self.config.dim:
                raise DimensionMismatch(
                    f"query has {q.shape} components, store dim is {self.config.dim}"
                )
            if self._dirty:
                self._rebuild_index()
            matrix = self._matrix
            row_norms = self._row_norms
            ids = self._matrix_ids
            tie_order = self._tie_order
            mask = np.fromiter(
                (self._records[rid].status in statuses for rid in ids),
                dtype=bool,
                count=len(ids),
            )
        if matrix is None or not mask.any():
            return []
        query_norm = float(np.linalg.norm(q))
        if query_norm == 0.0:
            raise DimensionMismatch("zero query vector has no direction")
        scores = np.clip((matrix @ q) / (row_norms * query_norm), -1.0, 1.0)
        eligible = mask & (scores >= min_score)
        idx = np.nonzero(eligible)[0]
        if idx.size == 0:
            return []
        # Primary key: quantized score descending; secondary: tie rank.
        quantized = np.array([float(format_component(s)) for s in scores[idx]])
        order = np.lexsort((tie_order[idx], -quantized))
        top = idx[order[:k]]
        return [
            RetrievalResult(record_id=ids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(top, start=1)
        ]

    # ------------------------------------------------------------------
    # Snapshot / load / compaction

    def _record_lines(self) -> list[str]:
        return [canonical_json(self._records[rid].to_dict()) for rid in self._insert_order]

    def snapshot(self, path: str | Path) -> None:
        """Write the full store state to one self-checking snapshot file."""
        with self._lock:
            lines = self._record_lines()
            body = "".join(line + "\n" for line in lines)
            checksum = hashlib.sha256(body.encode("utf-8")).hexdigest()
            header = canonical_json(
                {
                    "version": FORMAT_VERSION,
                    "dim": self.config.dim,
                    "fingerprint": self.config.fingerprint(),
                    "records": len(lines),
                    "checksum": checksum,
                }
            )
            try:
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(header + "\n")
                    fh.write(body)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"snapshot write failed: {exc}") from exc

    @classmethod
    def load(
        cls,
        path: str | Path,
        config: EmbedderConfig,
        *,
        embedder: Embedder | None = None,
    ) -> "MemoryStore":
        """Rebuild a store from a snapshot file, verifying its integrity."""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot read snapshot: {exc}") from exc
        lines = text.splitlines()
        if not lines:
            raise CorruptSnapshot("snapshot file is empty")
        try:
            header = json.loads(lines[0])
        except ValueError as exc:
            raise CorruptSnapshot(f"unreadable snapshot header: {exc}") from exc
        if header.get("version") != FORMAT_VERSION:
            raise VersionMismatch(f"snapshot version {header.get('version')} not supported")
        if header.get("fingerprint") != config.fingerprint():
            raise FingerprintMismatch(
                f"snapshot embedder {header.get('fingerprint')}, config {config.fingerprint()}"
            )
        body = "".join(line + "\n" for line in lines[1:])
        checksum = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if checksum != header.get("checksum"):
            raise CorruptSnapshot("snapshot checksum mismatch")
        if header.get("records") != len(lines) - 1:
            raise CorruptSnapshot(
                f"snapshot holds {len(lines) - 1} records, header says {header.get('records')}"
            )
        store = cls(config, path=None, embedder=embedder)
        for line in lines[1:]:
            try:
                record = ExperienceRecord.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptSnapshot(f"unreadable record line: {exc}") from exc
            if record.embedding.shape[0] != config.dim:
                raise DimensionMismatch(
                    f"record {record.id} has dim {record.embedding.shape[0]}, expected {config.dim}"
                )
            store._apply_record_state("insert", record)
        return store

    def _load_snapshot_file(self, path: Path) -> None:
        loaded = MemoryStore.load(path, self.config, embedder=self.embedder)
        self._records = loaded._records
        self._insert_order = loaded._insert_order
        self._problem_keys = loaded._problem_keys
        self._seq = loaded._seq
        self._dirty = True

    def compact(self) -> None:
        """Fold the event log into the directory snapshot and truncate it."""
        if self.path is None:
            return
        with self._lock:
            self.snapshot(self.path / _SNAPSHOT_FILE)
            if self._log_handle is not None:
                self._log_handle.close()
            try:
                self._log_handle = open(self.path / _EVENTS_FILE, "w", encoding="utf-8")
            except OSError as exc:
                raise StorageFailure(f"cannot truncate event log: {exc}") from exc


def _seq_of(record_id: str) -> int:
    try:
        return int(record_id.lstrip("r"))
    except ValueError:
        return 0
