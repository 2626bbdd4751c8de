"""HTTP review API: the queue, per-entry evidence, and human decisions.

A thin layer over the mapping store; every mutation goes through
MappingStore.apply_verdict, so the API adds no second write path and a
restart loses nothing. The built review UI is served statically at /.
"""

from __future__ import annotations

from typing import Optional, Sequence

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import Entry, Nature
from .linker import LinkerConfig, compute_coverage
from .normalize import TooFewTokens, title_forms
from .store import (
    MappingRecord,
    MappingStore,
    Status,
    first_sentence,
)

DEFAULT_PAGE_SIZE = 50
WIKIDATA_URL = "https://www.wikidata.org/wiki/"


def record_json(record: MappingRecord) -> dict:
    return {
        "entry_id": record.entry_id,
        "title": record.title,
        "nature": record.nature,
        "qid": record.qid,
        "status": record.status.value,
        "confidence": record.confidence,
        "provenance": record.provenance.value,
        "reviewer": record.reviewer,
        "updated_at": record.updated_at.strftime("%Y-%m-%dT%H:%M:%SZ")
        if record.updated_at
        else None,
        "note": record.note,
        "qid_url": f"{WIKIDATA_URL}{record.qid}" if record.qid else None,
    }


def _candidate_json(raw: dict) -> dict:
    label = ""
    for item in raw.get("evidence", []):
        if item.startswith("matched:"):
            label = item.split(":", 1)[1]
            break
        if "wiki:" in item:
            label = item.split("wiki:", 1)[1].replace("_", " ")
    return {**raw, "label": label, "qid_url": f"{WIKIDATA_URL}{raw.get('qid', '')}"}


class DecisionRequest(BaseModel):
    verdict: str
    qid: Optional[str] = None
    reviewer: Optional[str] = None
    note: Optional[str] = None


def create_app(
    store: MappingStore,
    entries: Sequence[Entry] = (),
    config: LinkerConfig = LinkerConfig(),
    static_dir: str | None = None,
    token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="dhbb-linker review", version="0.1")
    entries_by_id = {e.id: e for e in entries}

    def check_token(x_auth_token: Optional[str] = Header(default=None)) -> None:
        if token is not None and x_auth_token != token:
            raise HTTPException(status_code=401, detail="missing or wrong X-Auth-Token")

    auth = [Depends(check_token)]

    def queue_item(record: MappingRecord) -> dict:
        entry = entries_by_id.get(record.entry_id)
        decision = store.get_decision(record.entry_id) or {}
        return {
            "entry_id": record.entry_id,
            "title": record.title,
            "nature": record.nature,
            "status": record.status.value,
            "qid": record.qid,
            "confidence": record.confidence,
            "summary": first_sentence(entry.body) if entry else "",
            "source_path": entry.source_path if entry else None,
            "reasons": decision.get("reasons", []),
            "candidates": [_candidate_json(c) for c in decision.get("candidates", [])],
        }

    @app.get("/api/stats", dependencies=auth)
    def stats() -> dict:
        payload = {
            "total_entries": len(entries_by_id),
            "review": store.status_counts(),
            "stored": len(store),
        }
        if entries_by_id:
            payload["coverage"] = compute_coverage(
                store, entries_by_id.values()
            ).as_dict()
        return payload

    @app.get("/api/queue", dependencies=auth)
    def queue(
        status: Optional[str] = Query(default=None),
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=500),
    ) -> dict:
        if status is not None:
            try:
                wanted = {Status(status)}
            except ValueError:
                raise HTTPException(status_code=422, detail=f"unknown status {status!r}")
        else:
            wanted = set(Status)
        records = [r for r in store.all_records() if r.status in wanted]
        records.sort(key=lambda r: (r.nature, r.entry_id))
        start = (page - 1) * page_size
        window = records[start : start + page_size]
        return {
            "items": [queue_item(r) for r in window],
            "page": page,
            "page_size": page_size,
            "total": len(records),
            "status": status,
        }

    @app.get("/api/entries/{entry_id}", dependencies=auth)
    def entry_detail(entry_id: int) -> dict:
        record = store.get(entry_id)
        entry = entries_by_id.get(entry_id)
        if record is None and entry is None:
            raise HTTPException(status_code=404, detail=f"unknown entry {entry_id}")
        title = entry.title if entry else record.title
        nature = entry.nature if entry else Nature(record.nature)
        try:
            forms = title_forms(title, biographical=nature is Nature.BIOGRAPHICAL)
            forms_json = {
                "canonical": forms.canonical,
                "base": forms.base,
                "acronym": forms.acronym,
                "variants": list(forms.variants),
            }
        except TooFewTokens:
            forms_json = None
        decision = store.get_decision(entry_id)
        return {
            "entry": {
                "id": entry_id,
                "title": title,
                "nature": nature.value,
                "summary": first_sentence(entry.body) if entry else "",
                "source_path": entry.source_path if entry else None,
            },
            "forms": forms_json,
            "record": record_json(record) if record else None,
            "decision": {
                **decision,
                "candidates": [
                    _candidate_json(c) for c in decision.get("candidates", [])
                ],
            }
            if decision
            else None,
        }

    @app.post("/api/entries/{entry_id}/decision", dependencies=auth)
    def post_decision(entry_id: int, req: DecisionRequest) -> dict:
        if req.verdict not in MappingStore.VERDICTS:
            raise HTTPException(
                status_code=422,
                detail=f"verdict must be one of {sorted(MappingStore.VERDICTS)}",
            )
        if store.get(entry_id) is None:
            raise HTTPException(status_code=404, detail=f"unknown entry {entry_id}")
        try:
            outcome = store.apply_verdict(
                entry_id,
                req.verdict,
                qid=req.qid,
                reviewer=req.reviewer,
                note=req.note,
            )
        except Exception as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if outcome.conflict:
            raise HTTPException(
                status_code=409,
                detail={
                    "message": "entry already decided by a reviewer",
                    "record": record_json(outcome.record),
                },
            )
        return {"record": record_json(outcome.record), "changed": outcome.changed}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
