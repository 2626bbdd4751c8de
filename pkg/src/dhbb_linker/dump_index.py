"""Local Wikipedia title -> Wikidata QID index built from SQL dumps.

Streams MediaWiki `page`, `redirect`, and `page_props` dumps (the
`wikibase_item` page property carries the QID), resolves redirects with a
hop bound, and persists the result as a single sqlite file with a
versioned header. Parsing is single-pass and keeps only a small chunk
buffer in memory regardless of dump size.
"""

from __future__ import annotations

import gzip
import io
import logging
import re
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

log = logging.getLogger(__name__)

INDEX_MAGIC = "dhbb-sitelink-index"
INDEX_VERSION = "1"
REDIRECT_HOP_LIMIT = 4

QID_RE = re.compile(r"^Q\d+$")

Value = str | int | float | None


class DumpParseError(Exception):
    """Malformed SQL dump input; `offset` is the byte position reached."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class MalformedTuple(DumpParseError):
    pass


class ArityMismatch(DumpParseError):
    pass


class UnexpectedEndOfStream(DumpParseError):
    pass


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[str, ...]

    def index(self, column: str) -> int:
        return self.columns.index(column)


# Column layouts of current MediaWiki dumps.
PAGE_SCHEMA = TableSchema(
    "page",
    (
        "page_id",
        "page_namespace",
        "page_title",
        "page_is_redirect",
        "page_is_new",
        "page_random",
        "page_touched",
        "page_links_updated",
        "page_latest",
        "page_len",
        "page_content_model",
        "page_lang",
    ),
)
REDIRECT_SCHEMA = TableSchema(
    "redirect", ("rd_from", "rd_namespace", "rd_title", "rd_interwiki", "rd_fragment")
)
PAGE_PROPS_SCHEMA = TableSchema(
    "page_props", ("pp_page", "pp_propname", "pp_value", "pp_sortkey")
)


@dataclass(frozen=True)
class SqlTuple:
    values: tuple[Value, ...]


@dataclass(frozen=True)
class PageRecord:
    page_id: int
    namespace: int
    title: str  # underscores, as stored
    is_redirect: bool


_MYSQL_ESCAPES = {
    ord("n"): b"\n",
    ord("t"): b"\t",
    ord("r"): b"\r",
    ord("0"): b"\x00",
    ord("b"): b"\x08",
    ord("Z"): b"\x1a",
}

_CHUNK_SIZE = 1 << 16


class _Scanner:
    """Chunked byte scanner over a stream with absolute offset tracking."""

    def __init__(self, stream: BinaryIO, chunk_size: int = _CHUNK_SIZE):
        self._stream = stream
        self._chunk = chunk_size
        self._buf = b""
        self._pos = 0
        self._base = 0

    @property
    def offset(self) -> int:
        return self._base + self._pos

    def _fill(self) -> bool:
        if self._pos:
            self._base += self._pos
            self._buf = self._buf[self._pos:]
            self._pos = 0
        data = self._stream.read(self._chunk)
        if not data:
            return False
        self._buf += data
        return True

    def peek(self) -> int | None:
        if self._pos >= len(self._buf) and not self._fill():
            return None
        return self._buf[self._pos]

    def next(self) -> int | None:
        b = self.peek()
        if b is not None:
            self._pos += 1
        return b

    def skip_ws(self) -> None:
        while True:
            b = self.peek()
            if b is None or b not in (0x20, 0x09, 0x0A, 0x0D):
                return
            self._pos += 1

    def find(self, pattern: bytes) -> bool:
        """Advance past the next occurrence of `pattern`; False at EOF."""
        while True:
            idx = self._buf.find(pattern, self._pos)
            if idx >= 0:
                self._pos = idx + len(pattern)
                return True
            # Keep a pattern-sized tail so matches spanning chunks survive.
            keep = min(len(self._buf), len(pattern) - 1)
            self._pos = len(self._buf) - keep
            if not self._fill():
                self._pos = len(self._buf)
                return False


def _open_dump(source: str | Path | BinaryIO) -> BinaryIO:
    """Open a dump path or stream, transparently unwrapping gzip."""
    if isinstance(source, (str, Path)):
        stream: BinaryIO = open(source, "rb")
    else:
        stream = source
    buffered = stream if isinstance(stream, io.BufferedReader) else io.BufferedReader(stream)  # type: ignore[arg-type]
    head = buffered.peek(2)[:2]
    if head == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=buffered)  # type: ignore[return-value]
    return buffered


def _read_string(sc: _Scanner, quote: int) -> str:
    out = bytearray()
    while True:
        b = sc.next()
        if b is None:
            raise UnexpectedEndOfStream("stream ends inside quoted string", sc.offset)
        if b == ord("\\"):
            esc = sc.next()
            if esc is None:
                raise UnexpectedEndOfStream("stream ends inside escape", sc.offset)
            out += _MYSQL_ESCAPES.get(esc, bytes((esc,)))
        elif b == quote:
            if sc.peek() == quote:  # doubled quote
                sc.next()
                out.append(quote)
            else:
                return out.decode("utf-8", errors="replace")
        else:
            out.append(b)


_NUMBER_BYTES = frozenset(b"+-.0123456789eE")


def _read_number(sc: _Scanner) -> int | float:
    start = sc.offset
    out = bytearray()
    while True:
        b = sc.peek()
        if b is None or b not in _NUMBER_BYTES:
            break
        out.append(b)
        sc.next()
    text = out.decode("ascii")
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise MalformedTuple(f"bad numeric literal {text!r}", start) from None


def _read_value(sc: _Scanner) -> Value:
    sc.skip_ws()
    b = sc.peek()
    if b is None:
        raise UnexpectedEndOfStream("stream ends where a value was expected", sc.offset)
    if b in (ord("'"), ord('"')):
        sc.next()
        return _read_string(sc, b)
    if b == ord("N"):
        start = sc.offset
        literal = bytes(x for x in (sc.next() for _ in range(4)) if x is not None)
        if literal != b"NULL":
            raise MalformedTuple(f"expected NULL, got {literal!r}", start)
        return None
    if b in _NUMBER_BYTES:
        return _read_number(sc)
    raise MalformedTuple(f"unexpected byte {bytes((b,))!r} at start of value", sc.offset)


def _read_identifier(sc: _Scanner) -> str:
    sc.skip_ws()
    if sc.peek() == ord("`"):
        sc.next()
        out = bytearray()
        while True:
            b = sc.next()
            if b is None:
                raise UnexpectedEndOfStream("stream ends inside identifier", sc.offset)
            if b == ord("`"):
                break
            out.append(b)
        return out.decode("utf-8", errors="replace")
    out = bytearray()
    while True:
        b = sc.peek()
        if b is None or not (chr(b).isalnum() or b == ord("_")):
            break
        out.append(b)
        sc.next()
    return out.decode("utf-8", errors="replace")


def _skip_statement(sc: _Scanner) -> None:
    # Consume to the terminating ';' of the current statement, honoring quotes.
    while True:
        b = sc.next()
        if b is None:
            return
        if b in (ord("'"), ord('"')):
            _read_string(sc, b)
        elif b == ord(";"):
            return


def parse_sql_dump(
    source: str | Path | BinaryIO, schema: TableSchema
) -> Iterator[SqlTuple]:
    """Yield one SqlTuple per row of a MediaWiki `INSERT INTO ... VALUES` dump.

    Handles gzip input (detected by magic bytes), backslash and doubled-quote
    escapes, embedded commas and parentheses inside strings, and NULL.
    Statements for other tables are skipped. Raises MalformedTuple,
    ArityMismatch, or UnexpectedEndOfStream with a byte offset (offsets are
    into the decompressed stream for gzip input).
    """
    sc = _Scanner(_open_dump(source))
    arity = len(schema.columns)
    while True:
        if not sc.find(b"INSERT INTO"):
            return
        table = _read_identifier(sc)
        if table != schema.name:
            _skip_statement(sc)
            continue
        if not sc.find(b"VALUES"):
            raise UnexpectedEndOfStream("INSERT without VALUES", sc.offset)
        while True:  # one parenthesized group per row
            sc.skip_ws()
            b = sc.next()
            if b is None:
                raise UnexpectedEndOfStream("stream ends before row group", sc.offset)
            if b != ord("("):
                raise MalformedTuple(f"expected '(', got {bytes((b,))!r}", sc.offset - 1)
            values: list[Value] = []
            while True:
                values.append(_read_value(sc))
                sc.skip_ws()
                b = sc.next()
                if b is None:
                    raise UnexpectedEndOfStream("stream ends inside row group", sc.offset)
                if b == ord(","):
                    continue
                if b == ord(")"):
                    break
                raise MalformedTuple(f"expected ',' or ')', got {bytes((b,))!r}", sc.offset - 1)
            if len(values) != arity:
                raise ArityMismatch(
                    f"{schema.name} row has {len(values)} values, schema has {arity}",
                    sc.offset,
                )
            yield SqlTuple(tuple(values))
            sc.skip_ws()
            b = sc.next()
            if b is None:
                raise UnexpectedEndOfStream("statement not terminated", sc.offset)
            if b == ord(","):
                continue
            if b == ord(";"):
                break
            raise MalformedTuple(f"expected ',' or ';', got {bytes((b,))!r}", sc.offset - 1)


def iter_pages(
    source: str | Path | BinaryIO, schema: TableSchema = PAGE_SCHEMA
) -> Iterator[PageRecord]:
    """Typed view over a `page` dump."""
    i_id = schema.index("page_id")
    i_ns = schema.index("page_namespace")
    i_title = schema.index("page_title")
    i_redir = schema.index("page_is_redirect")
    for row in parse_sql_dump(source, schema):
        v = row.values
        yield PageRecord(
            page_id=int(v[i_id]),  # type: ignore[arg-type]
            namespace=int(v[i_ns]),  # type: ignore[arg-type]
            title=str(v[i_title]),
            is_redirect=bool(v[i_redir]),
        )


def normalize_mw_title(title: str) -> str:
    """MediaWiki title normalization: underscores and an uppercased first letter."""
    t = "_".join(title.split()).strip("_").replace(" ", "_")
    return t[:1].upper() + t[1:]


@dataclass(frozen=True)
class LookupResult:
    qid: str | None
    hops: int
    diagnostic: str | None = None  # "cycle" or "hop-limit" when resolution failed
    final_title: str | None = None  # normalized title the QID was found under


@dataclass
class SitelinkIndex:
    """Immutable after build; safe to share across concurrent readers."""

    direct: dict[str, str] = field(default_factory=dict)
    redirects: dict[str, str] = field(default_factory=dict)
    stats: dict[str, int] = field(default_factory=dict)
    source_label: str = ""
    warnings: list[str] = field(default_factory=list)
    created_at: str | None = None

    def resolve(self, title: str, hop_limit: int = REDIRECT_HOP_LIMIT) -> LookupResult:
        t = normalize_mw_title(title)
        seen = {t}
        hops = 0
        while True:
            qid = self.direct.get(t)
            if qid is not None:
                return LookupResult(qid=qid, hops=hops, final_title=t)
            target = self.redirects.get(t)
            if target is None:
                return LookupResult(qid=None, hops=hops)
            if hops >= hop_limit:
                return LookupResult(qid=None, hops=hops, diagnostic="hop-limit")
            t = normalize_mw_title(target)
            hops += 1
            if t in seen:
                log.debug("redirect cycle at %r", title)
                return LookupResult(qid=None, hops=hops, diagnostic="cycle")
            seen.add(t)

    def lookup_title(self, title: str) -> str | None:
        return self.resolve(title).qid

    def save(self, path: str | Path, created_at: str | None = None) -> None:
        """Persist to a fresh sqlite file.

        Rows are written in sorted order so identical inputs produce
        byte-identical files; `created_at` is the one documented field
        allowed to vary between otherwise identical builds.
        """
        path = Path(path)
        if path.exists():
            path.unlink()
        con = sqlite3.connect(path)
        try:
            con.execute("CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT)")
            con.execute("CREATE TABLE direct (title TEXT PRIMARY KEY, qid TEXT NOT NULL)")
            con.execute(
                "CREATE TABLE redirects (title TEXT PRIMARY KEY, target TEXT NOT NULL)"
            )
            meta = {
                "magic": INDEX_MAGIC,
                "version": INDEX_VERSION,
                "source_label": self.source_label,
                "created_at": created_at if created_at is not None else (self.created_at or ""),
                **{f"stat_{k}": str(v) for k, v in sorted(self.stats.items())},
            }
            con.executemany("INSERT INTO meta VALUES (?, ?)", sorted(meta.items()))
            con.executemany(
                "INSERT INTO direct VALUES (?, ?)", sorted(self.direct.items())
            )
            con.executemany(
                "INSERT INTO redirects VALUES (?, ?)", sorted(self.redirects.items())
            )
            con.commit()
        finally:
            con.close()

    @classmethod
    def load(cls, path: str | Path) -> "SitelinkIndex":
        con = sqlite3.connect(f"file:{Path(path)}?mode=ro", uri=True)
        try:
            meta = dict(con.execute("SELECT key, value FROM meta"))
            if meta.get("magic") != INDEX_MAGIC:
                raise ValueError(f"{path}: not a sitelink index file")
            if meta.get("version") != INDEX_VERSION:
                raise ValueError(f"{path}: unsupported index version {meta.get('version')!r}")
            index = cls(
                direct=dict(con.execute("SELECT title, qid FROM direct")),
                redirects=dict(con.execute("SELECT title, target FROM redirects")),
                stats={
                    k[len("stat_"):]: int(v)
                    for k, v in meta.items()
                    if k.startswith("stat_")
                },
                source_label=meta.get("source_label", ""),
                created_at=meta.get("created_at") or None,
            )
            return index
        finally:
            con.close()


def build_index(
    page_dump: str | Path | BinaryIO,
    redirect_dump: str | Path | BinaryIO,
    pageprops_dump: str | Path | BinaryIO,
    source_label: str = "",
    namespaces: Iterable[int] = (0,),
    page_schema: TableSchema = PAGE_SCHEMA,
    redirect_schema: TableSchema = REDIRECT_SCHEMA,
    pageprops_schema: TableSchema = PAGE_PROPS_SCHEMA,
) -> SitelinkIndex:
    """Build a SitelinkIndex from the three dumps of one wiki snapshot.

    The direct map holds non-redirect titles in the retained namespaces
    that carry a `wikibase_item` page property; the redirects map holds
    redirect titles pointing at same-namespace targets. Page ids seen in
    page_props but absent from the page dump are collected as snapshot
    mismatch warnings rather than errors.
    """
    keep_ns = frozenset(namespaces)

    pages: dict[int, PageRecord] = {}
    page_count = 0
    for rec in iter_pages(page_dump, page_schema):
        if rec.namespace in keep_ns:
            pages[rec.page_id] = rec
            page_count += 1

    i_page = pageprops_schema.index("pp_page")
    i_name = pageprops_schema.index("pp_propname")
    i_value = pageprops_schema.index("pp_value")
    qid_by_page: dict[int, str] = {}
    mismatches = 0
    for row in parse_sql_dump(pageprops_dump, pageprops_schema):
        if row.values[i_name] != "wikibase_item":
            continue
        page_id = int(row.values[i_page])  # type: ignore[arg-type]
        qid = str(row.values[i_value])
        if not QID_RE.match(qid):
            log.warning("ignoring malformed QID %r for page %d", qid, page_id)
            continue
        if page_id not in pages:
            mismatches += 1
            continue
        qid_by_page[page_id] = qid

    index = SitelinkIndex(source_label=source_label)
    if mismatches:
        index.warnings.append(
            f"snapshot mismatch: {mismatches} page_props rows reference page ids "
            "absent from the page dump"
        )
        log.warning(index.warnings[-1])

    for page_id, rec in pages.items():
        if not rec.is_redirect and page_id in qid_by_page:
            index.direct[normalize_mw_title(rec.title)] = qid_by_page[page_id]

    i_from = redirect_schema.index("rd_from")
    i_ns = redirect_schema.index("rd_namespace")
    i_title = redirect_schema.index("rd_title")
    redirect_count = 0
    for row in parse_sql_dump(redirect_dump, redirect_schema):
        if int(row.values[i_ns]) not in keep_ns:  # type: ignore[arg-type]
            continue
        source = pages.get(int(row.values[i_from]))  # type: ignore[arg-type]
        if source is None or not source.is_redirect:
            continue
        index.redirects[normalize_mw_title(source.title)] = normalize_mw_title(
            str(row.values[i_title])
        )
        redirect_count += 1

    index.stats = {
        "pages": page_count,
        "redirects": redirect_count,
        "qids": len(index.direct),
    }
    return index
