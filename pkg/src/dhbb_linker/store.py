"""Persistent entry -> QID mapping store with TSV interchange.

One sqlite file holds the current mapping per entry plus the latest
pipeline decision payload (used by the review service to show evidence).
Human-entered rows are protected: pipeline re-runs never overwrite
them, they only flag conflicts. TSV export/import round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator

STORE_MAGIC = "dhbb-mapping-store"
STORE_VERSION = "1"

TSV_COLUMNS = (
    "entry_id",
    "title",
    "nature",
    "qid",
    "status",
    "confidence",
    "provenance",
    "reviewer",
    "updated_at",
    "note",
)


class Status(str, Enum):
    UNREVIEWED_AUTO = "unreviewed_auto"
    UNREVIEWED_AMBIGUOUS = "unreviewed_ambiguous"
    UNREVIEWED_NOT_FOUND = "unreviewed_not_found"
    CONFIRMED = "confirmed"
    REJECTED = "rejected"
    MANUAL = "manual"
    CONFIRMED_ABSENT = "confirmed_absent"


class Provenance(str, Enum):
    PIPELINE = "pipeline"
    HUMAN = "human"


HUMAN_STATUSES = frozenset(
    {Status.CONFIRMED, Status.REJECTED, Status.MANUAL, Status.CONFIRMED_ABSENT}
)


class StoreError(Exception):
    pass


class HeaderMismatch(StoreError):
    def __init__(self, expected: tuple[str, ...], got: tuple[str, ...]):
        super().__init__(f"TSV header mismatch: expected {expected}, got {got}")


class MalformedRow(StoreError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownVerdict(StoreError):
    pass


@dataclass(frozen=True)
class MappingRecord:
    entry_id: int
    title: str
    nature: str  # "biographical" | "thematic"
    qid: str | None
    status: Status
    confidence: float | None
    provenance: Provenance
    reviewer: str | None = None
    updated_at: datetime | None = None
    note: str | None = None


@dataclass(frozen=True)
class UpsertOutcome:
    record: MappingRecord  # the row now in the store
    changed: bool
    conflict: bool  # True when a protected human row blocked the write


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _dt_to_text(dt: datetime | None) -> str | None:
    if dt is None:
        return None
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _text_to_dt(text: str | None) -> datetime | None:
    if not text:
        return None
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


class MappingStore:
    """Single-file store; a process-wide lock serializes writers."""

    def __init__(
        self,
        path: str | Path = ":memory:",
        clock: Callable[[], datetime] = _utc_now,
    ):
        self._con = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.RLock()
        self._clock = clock
        self.path = str(path)
        with self._lock:
            self._init_schema()

    def _init_schema(self) -> None:
        con = self._con
        con.execute("CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT)")
        con.execute(
            "CREATE TABLE IF NOT EXISTS mappings ("
            " entry_id INTEGER PRIMARY KEY,"
            " title TEXT NOT NULL,"
            " nature TEXT NOT NULL,"
            " qid TEXT,"
            " status TEXT NOT NULL,"
            " confidence REAL,"
            " provenance TEXT NOT NULL,"
            " reviewer TEXT,"
            " updated_at TEXT,"
            " note TEXT)"
        )
        con.execute(
            "CREATE TABLE IF NOT EXISTS decisions ("
            " entry_id INTEGER PRIMARY KEY, payload TEXT NOT NULL)"
        )
        existing = dict(con.execute("SELECT key, value FROM meta"))
        if existing:
            if existing.get("magic") != STORE_MAGIC:
                raise StoreError(f"{self.path}: not a mapping store file")
            if existing.get("version") != STORE_VERSION:
                raise StoreError(
                    f"{self.path}: unsupported store version {existing.get('version')!r}"
                )
        else:
            con.executemany(
                "INSERT INTO meta VALUES (?, ?)",
                [("magic", STORE_MAGIC), ("version", STORE_VERSION)],
            )
        con.commit()

    def close(self) -> None:
        self._con.close()

    # -- row access ------------------------------------------------------

    @staticmethod
    def _row_to_record(row: tuple) -> MappingRecord:
        return MappingRecord(
            entry_id=row[0],
            title=row[1],
            nature=row[2],
            qid=row[3],
            status=Status(row[4]),
            confidence=row[5],
            provenance=Provenance(row[6]),
            reviewer=row[7],
            updated_at=_text_to_dt(row[8]),
            note=row[9],
        )

    _SELECT = (
        "SELECT entry_id, title, nature, qid, status, confidence,"
        " provenance, reviewer, updated_at, note FROM mappings"
    )

    def get(self, entry_id: int) -> MappingRecord | None:
        with self._lock:
            row = self._con.execute(
                f"{self._SELECT} WHERE entry_id = ?", (entry_id,)
            ).fetchone()
        return self._row_to_record(row) if row else None

    def all_records(self) -> list[MappingRecord]:
        with self._lock:
            rows = self._con.execute(f"{self._SELECT} ORDER BY entry_id").fetchall()
        return [self._row_to_record(r) for r in rows]

    def records_by_status(self, status: Status) -> list[MappingRecord]:
        with self._lock:
            rows = self._con.execute(
                f"{self._SELECT} WHERE status = ? ORDER BY entry_id", (status.value,)
            ).fetchall()
        return [self._row_to_record(r) for r in rows]

    def __len__(self) -> int:
        with self._lock:
            return self._con.execute("SELECT COUNT(*) FROM mappings").fetchone()[0]

    def _write(self, record: MappingRecord) -> None:
        self._con.execute(
            "INSERT OR REPLACE INTO mappings VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
            (
                record.entry_id,
                record.title,
                record.nature,
                record.qid,
                record.status.value,
                record.confidence,
                record.provenance.value,
                record.reviewer,
                _dt_to_text(record.updated_at),
                record.note,
            ),
        )
        self._con.commit()

    # -- pipeline writes -------------------------------------------------

    def upsert_decision(self, record: MappingRecord) -> UpsertOutcome:
        """Write a pipeline-produced row; human rows are left untouched.

        Re-writing an identical pipeline row is a no-op that preserves the
        original updated_at, so repeated runs leave the file unchanged.
        """
        if record.provenance is not Provenance.PIPELINE:
            raise StoreError("upsert_decision only accepts pipeline provenance")
        with self._lock:
            existing = self.get(record.entry_id)
            if existing is not None and existing.provenance is Provenance.HUMAN:
                conflict = (existing.status, existing.qid) != (record.status, record.qid)
                return UpsertOutcome(record=existing, changed=False, conflict=conflict)
            if existing is not None and self._same_payload(existing, record):
                return UpsertOutcome(record=existing, changed=False, conflict=False)
            stamped = replace(record, updated_at=self._clock())
            self._write(stamped)
            return UpsertOutcome(record=stamped, changed=True, conflict=False)

    @staticmethod
    def _same_payload(a: MappingRecord, b: MappingRecord) -> bool:
        keys = ("title", "nature", "qid", "status", "confidence", "provenance", "note")
        return all(getattr(a, k) == getattr(b, k) for k in keys)

    def store_decision(self, entry_id: int, payload: dict) -> None:
        """Keep the latest pipeline decision evidence for the review UI."""
        with self._lock:
            self._con.execute(
                "INSERT OR REPLACE INTO decisions VALUES (?, ?)",
                (entry_id, json.dumps(payload, ensure_ascii=False, sort_keys=True)),
            )
            self._con.commit()

    def get_decision(self, entry_id: int) -> dict | None:
        with self._lock:
            row = self._con.execute(
                "SELECT payload FROM decisions WHERE entry_id = ?", (entry_id,)
            ).fetchone()
        return json.loads(row[0]) if row else None

    # -- human writes ----------------------------------------------------

    VERDICTS = ("confirm", "reject", "manual", "absent")

    def apply_verdict(
        self,
        entry_id: int,
        verdict: str,
        qid: str | None = None,
        reviewer: str | None = None,
        note: str | None = None,
    ) -> UpsertOutcome:
        """Record a human verdict for an entry already present in the store.

        confirm -> confirmed (keeps or sets the QID), reject -> rejected
        (QID kept for audit), manual -> manual (QID required),
        absent -> confirmed_absent (QID cleared). A second human verdict
        that disagrees on (status, qid) is reported as a conflict and the
        stored row is left as it was.
        """
        with self._lock:
            existing = self.get(entry_id)
            if existing is None:
                raise StoreError(f"entry {entry_id} is not in the store")
            if verdict == "confirm":
                new_qid = qid if qid is not None else existing.qid
                if new_qid is None:
                    raise StoreError("confirm requires a QID")
                status = Status.CONFIRMED
            elif verdict == "reject":
                new_qid = existing.qid
                status = Status.REJECTED
            elif verdict == "manual":
                if qid is None:
                    raise StoreError("manual requires a QID")
                new_qid = qid
                status = Status.MANUAL
            elif verdict == "absent":
                new_qid = None
                status = Status.CONFIRMED_ABSENT
            else:
                raise UnknownVerdict(f"unknown verdict {verdict!r}")

            if existing.provenance is Provenance.HUMAN and (
                existing.status,
                existing.qid,
            ) != (status, new_qid):
                return UpsertOutcome(record=existing, changed=False, conflict=True)

            stamped = replace(
                existing,
                qid=new_qid,
                status=status,
                provenance=Provenance.HUMAN,
                reviewer=reviewer,
                note=note if note is not None else existing.note,
                updated_at=self._clock(),
            )
            if existing.provenance is Provenance.HUMAN and self._same_payload(
                existing, stamped
            ):
                return UpsertOutcome(record=existing, changed=False, conflict=False)
            self._write(stamped)
            return UpsertOutcome(record=stamped, changed=True, conflict=False)

    # -- counting --------------------------------------------------------

    def status_counts(self) -> dict[str, int]:
        with self._lock:
            rows = self._con.execute(
                "SELECT status, COUNT(*) FROM mappings GROUP BY status"
            ).fetchall()
        counts = {s.value: 0 for s in Status}
        counts.update(dict(rows))
        return counts


# -- TSV interchange -----------------------------------------------------


def _confidence_to_text(value: float | None) -> str:
    return "" if value is None else repr(value)


def export_tsv(records: Iterable[MappingRecord], out: io.TextIOBase) -> int:
    """Write records as TSV with a fixed header; None fields become empty.

    Tabs, quotes, and newlines inside fields survive via standard csv
    quoting; NUL bytes are not representable in this dialect.
    """
    minimal = csv.writer(out, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    # QUOTE_MINIMAL leaves a bare CR (no LF) unquoted, which the reader
    # then rejects; rows containing one are written fully quoted instead.
    quote_all = csv.writer(out, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_ALL)
    minimal.writerow(TSV_COLUMNS)
    n = 0
    for r in records:
        row = (
            str(r.entry_id),
            r.title,
            r.nature,
            r.qid or "",
            r.status.value,
            _confidence_to_text(r.confidence),
            r.provenance.value,
            r.reviewer or "",
            _dt_to_text(r.updated_at) or "",
            r.note or "",
        )
        writer = quote_all if any("\r" in field for field in row) else minimal
        writer.writerow(row)
        n += 1
    return n


def export_tsv_path(records: Iterable[MappingRecord], path: str | Path) -> int:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        return export_tsv(records, fh)


def import_tsv(source: io.TextIOBase) -> Iterator[MappingRecord]:
    """Parse TSV produced by export_tsv back into records.

    Raises HeaderMismatch on a wrong header and MalformedRow (with the
    1-based line number) on rows with wrong arity or bad field values.
    """
    reader = csv.reader(source, delimiter="\t", lineterminator="\n")
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise HeaderMismatch(TSV_COLUMNS, ()) from None
    if header != TSV_COLUMNS:
        raise HeaderMismatch(TSV_COLUMNS, header)
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TSV_COLUMNS):
            raise MalformedRow(line_no, f"expected {len(TSV_COLUMNS)} fields, got {len(row)}")
        (eid, title, nature, qid, status, conf, prov, reviewer, updated, note) = row
        try:
            yield MappingRecord(
                entry_id=int(eid),
                title=title,
                nature=nature,
                qid=qid or None,
                status=Status(status),
                confidence=float(conf) if conf else None,
                provenance=Provenance(prov),
                reviewer=reviewer or None,
                updated_at=_text_to_dt(updated or None),
                note=note or None,
            )
        except (ValueError, KeyError) as exc:
            raise MalformedRow(line_no, str(exc)) from exc


def import_tsv_path(path: str | Path) -> list[MappingRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(import_tsv(fh))


# -- gap report ----------------------------------------------------------

GAP_STATUSES = frozenset({Status.UNREVIEWED_NOT_FOUND, Status.CONFIRMED_ABSENT})
DESCRIPTION_MAX_CHARS = 250

_SENTENCE_END = (". ", ".\n", "! ", "!\n", "? ", "?\n")


@dataclass(frozen=True)
class GapItem:
    """One entry with no Wikidata counterpart, shaped for item creation."""

    entry_id: int
    title: str
    nature: str
    suggested_label: str
    suggested_description: str
    reason_tags: tuple[str, ...] = ()


def first_sentence(body: str, max_chars: int = DESCRIPTION_MAX_CHARS) -> str:
    """First sentence of a body text, truncated to max_chars."""
    text = " ".join(body.split())
    if not text:
        return ""
    cut = len(text)
    for mark in _SENTENCE_END:
        idx = (text + " ").find(mark)
        if 0 <= idx < cut:
            cut = idx + 1
    return text[:cut][:max_chars]


def gap_report(store: MappingStore, entries: Iterable) -> list[GapItem]:
    """GapItems for entries whose mapping says Wikidata has no item.

    `entries` supplies bodies and display titles (corpus Entry objects);
    records without a matching entry still appear, with an empty
    description. Output is sorted by nature then title.
    """
    from . import normalize

    by_id = {e.id: e for e in entries}
    items = []
    for record in store.all_records():
        if record.status not in GAP_STATUSES:
            continue
        entry = by_id.get(record.entry_id)
        body = entry.body if entry is not None else ""
        title = entry.title if entry is not None else record.title
        decision = store.get_decision(record.entry_id) or {}
        items.append(
            GapItem(
                entry_id=record.entry_id,
                title=title,
                nature=record.nature,
                suggested_label=normalize.canonicalize(title),
                suggested_description=first_sentence(body),
                reason_tags=tuple(decision.get("reasons", ())),
            )
        )
    items.sort(key=lambda g: (g.nature, g.title))
    return items


def gap_report_tsv(items: Iterable[GapItem], out: io.TextIOBase) -> int:
    writer = csv.writer(out, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(
        ("entry_id", "title", "nature", "suggested_label", "suggested_description", "reason_tags")
    )
    n = 0
    for g in items:
        writer.writerow(
            (
                str(g.entry_id),
                g.title,
                g.nature,
                g.suggested_label,
                g.suggested_description,
                ",".join(g.reason_tags),
            )
        )
        n += 1
    return n
