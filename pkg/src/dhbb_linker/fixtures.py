"""Test and demo scaffolding: SQL dump writer and a canned API transport.

`write_sql_dump` is the serialization inverse of the dump parser, used
to build synthetic dump files. `CannedTransport` answers search and
entity-fetch requests from plain dicts, which keeps end-to-end runs
fully offline.
"""

from __future__ import annotations

import gzip as gzip_mod
import io
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping, Sequence

from .dump_index import TableSchema, Value
from .wd_client import EntityRecord, FixtureMissing, SearchHit


def _sql_literal(value: Value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, (int, float)):
        return repr(value)
    escaped = (
        value.replace("\\", "\\\\")
        .replace("'", "\\'")
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
        .replace("\x00", "\\0")
    )
    return f"'{escaped}'"


def write_sql_dump(
    rows: Iterable[Sequence[Value]],
    schema: TableSchema,
    out: str | Path | BinaryIO,
    gzip: bool = False,
    rows_per_statement: int = 100,
) -> int:
    """Serialize rows in MediaWiki `INSERT INTO ... VALUES` dump format."""

    def render(stream: io.TextIOBase) -> int:
        stream.write(f"-- Dump of `{schema.name}`\n")
        stream.write(
            f"CREATE TABLE `{schema.name}` ({', '.join(schema.columns)});\n"
        )
        count = 0
        batch: list[str] = []
        for row in rows:
            if len(row) != len(schema.columns):
                raise ValueError(
                    f"row has {len(row)} values, schema {schema.name} has "
                    f"{len(schema.columns)}"
                )
            batch.append("(" + ",".join(_sql_literal(v) for v in row) + ")")
            count += 1
            if len(batch) >= rows_per_statement:
                stream.write(f"INSERT INTO `{schema.name}` VALUES {','.join(batch)};\n")
                batch = []
        if batch:
            stream.write(f"INSERT INTO `{schema.name}` VALUES {','.join(batch)};\n")
        return count

    if isinstance(out, (str, Path)):
        opener = gzip_mod.open if gzip else open
        with opener(out, "wt", encoding="utf-8") as fh:  # type: ignore[operator]
            return render(fh)
    if gzip:
        with gzip_mod.open(out, "wt", encoding="utf-8") as fh:
            return render(fh)  # type: ignore[arg-type]
    text = io.TextIOWrapper(out, encoding="utf-8")
    try:
        return render(text)
    finally:
        text.detach()


def entity_payload(record: EntityRecord) -> dict:
    """Render an EntityRecord as a wbgetentities-style entity dict."""
    claims: dict = {}

    def claim(prop: str, qids: Sequence[str] | None) -> None:
        if qids is None:
            return
        claims[prop] = [
            {"mainsnak": {"datavalue": {"value": {"id": qid}}}} for qid in qids
        ]

    claim("P31", record.instance_of if record.instance_of else None)
    claim("P17", record.country)
    claim("P27", record.citizenship)
    return {
        "id": record.qid,
        "labels": {lang: {"value": text} for lang, text in record.labels.items()},
        "aliases": {
            lang: [{"value": a} for a in items]
            for lang, items in record.aliases.items()
        },
        "claims": claims,
        "sitelinks": {
            wiki: {"title": title} for wiki, title in record.sitelinks.items()
        },
    }


class CannedTransport:
    """In-memory transport answering from scenario dicts.

    searches maps query text -> list of SearchHit (used for every
    language); entities maps QID -> EntityRecord. Unknown searches
    return no hits and unknown QIDs report missing, unless strict, in
    which case they raise FixtureMissing so tests catch scenario holes.
    """

    def __init__(
        self,
        searches: Mapping[str, Sequence[SearchHit]] | None = None,
        entities: Mapping[str, EntityRecord] | None = None,
        strict: bool = False,
    ):
        self.searches = dict(searches or {})
        self.entities = dict(entities or {})
        self.strict = strict
        self.calls = 0
        self.log: list[dict] = []

    def get(self, params: Mapping[str, str]) -> dict:
        self.calls += 1
        self.log.append(dict(params))
        action = params.get("action")
        if action == "wbsearchentities":
            return self._search(params)
        if action == "wbgetentities":
            return self._entities(params)
        raise FixtureMissing("unsupported-action", params)

    def _search(self, params: Mapping[str, str]) -> dict:
        query = params.get("search", "")
        if query not in self.searches:
            if self.strict:
                raise FixtureMissing("search", params)
            return {"search": []}
        limit = int(params.get("limit", "7"))
        hits = self.searches[query][:limit]
        return {
            "search": [
                {
                    "id": h.qid,
                    "label": h.label,
                    "description": h.description,
                    "match": {"text": h.match_text or h.label},
                }
                for h in hits
            ]
        }

    def _entities(self, params: Mapping[str, str]) -> dict:
        out: dict = {}
        for qid in params.get("ids", "").split("|"):
            if not qid:
                continue
            record = self.entities.get(qid)
            if record is None:
                if self.strict:
                    raise FixtureMissing("entity", params)
                out[qid] = {"id": qid, "missing": ""}
            else:
                out[qid] = entity_payload(record)
        return {"entities": out}
