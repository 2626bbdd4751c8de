"""Review API: auth, stats, queue, entry detail, decision endpoint."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from dhbb_linker.corpus import Entry, Nature
from dhbb_linker.service import create_app
from dhbb_linker.store import MappingRecord, MappingStore, Provenance, Status

ENTRIES = [
    Entry(1, "Frente Ampla", Nature.THEMATIC,
          "A Frente Ampla reuniu opositores. Durou pouco.", "1.text"),
    Entry(2, "Clube X", Nature.THEMATIC, "O Clube X foi fundado. Fim.", "2.text"),
    Entry(3, "Paulo Tarso Flecha de Lima", Nature.BIOGRAPHICAL,
          "Diplomata mineiro. Serviu em Londres.", "3.text"),
    Entry(4, "Lula", Nature.BIOGRAPHICAL, "Operário e político.", "4.text"),
    Entry(6, "Sem Registro", Nature.THEMATIC, "Nunca foi ligado.", "6.text"),
]

DECISION_1 = {
    "entry_id": 1,
    "status": "auto_mapped",
    "chosen": "Q123",
    "reasons": ["score_accepted"],
    "candidates": [
        {
            "qid": "Q123",
            "source": "sitelink",
            "raw_score": 1.0,
            "final_score": 1.0,
            "penalties": [],
            "evidence": ["canonical:Frente Ampla", "ptwiki:Frente_Ampla"],
        }
    ],
}

DECISION_2 = {
    "entry_id": 2,
    "status": "not_found",
    "chosen": None,
    "reasons": ["no_candidates"],
    "candidates": [],
}


def build_store() -> MappingStore:
    store = MappingStore(":memory:")

    def rec(eid, title, nature, qid, status, confidence):
        store.upsert_decision(
            MappingRecord(
                entry_id=eid, title=title, nature=nature, qid=qid,
                status=status, confidence=confidence,
                provenance=Provenance.PIPELINE,
            )
        )

    rec(1, "Frente Ampla", "thematic", "Q123", Status.UNREVIEWED_AUTO, 1.0)
    rec(2, "Clube X", "thematic", None, Status.UNREVIEWED_NOT_FOUND, None)
    rec(3, "Paulo Tarso Flecha de Lima", "biographical", "Q77",
        Status.UNREVIEWED_AUTO, 0.95)
    rec(4, "Lula", "biographical", None, Status.UNREVIEWED_AMBIGUOUS, 0.85)
    rec(5, "Zeta", "thematic", "Q5", Status.UNREVIEWED_AUTO, 0.9)
    store.store_decision(1, DECISION_1)
    store.store_decision(2, DECISION_2)
    return store


@pytest.fixture()
def client():
    return TestClient(create_app(build_store(), ENTRIES))


class TestAuth:
    def test_token_required_when_configured(self):
        app = create_app(build_store(), ENTRIES, token="s3cret")
        c = TestClient(app)
        assert c.get("/api/stats").status_code == 401
        assert c.get("/api/stats", headers={"X-Auth-Token": "wrong"}).status_code == 401
        ok = c.get("/api/stats", headers={"X-Auth-Token": "s3cret"})
        assert ok.status_code == 200

    def test_no_token_means_open(self, client):
        assert client.get("/api/stats").status_code == 200

    def test_static_ui_served_at_root(self, tmp_path):
        (tmp_path / "index.html").write_text("<h1>review</h1>")
        app = create_app(build_store(), ENTRIES, static_dir=str(tmp_path))
        c = TestClient(app)
        page = c.get("/")
        assert page.status_code == 200
        assert "review" in page.text
        assert c.get("/api/stats").status_code == 200


class TestStats:
    def test_counts_and_coverage(self, client):
        stats = client.get("/api/stats").json()
        assert stats["total_entries"] == 5
        assert stats["stored"] == 5
        assert stats["review"]["unreviewed_auto"] == 3
        assert stats["review"]["confirmed"] == 0
        assert stats["coverage"]["thematic"]["mapped"] == 1
        assert stats["coverage"]["biographical"]["ambiguous"] == 1

    def test_without_entries_no_coverage_block(self):
        c = TestClient(create_app(build_store()))
        stats = c.get("/api/stats").json()
        assert stats["total_entries"] == 0
        assert "coverage" not in stats


class TestQueue:
    def test_sorted_by_nature_then_id(self, client):
        data = client.get("/api/queue").json()
        assert [i["entry_id"] for i in data["items"]] == [3, 4, 1, 2, 5]
        assert data["total"] == 5
        assert data["page"] == 1
        assert data["page_size"] == 50

    def test_status_filter(self, client):
        data = client.get("/api/queue", params={"status": "unreviewed_auto"}).json()
        assert [i["entry_id"] for i in data["items"]] == [3, 1, 5]
        assert data["status"] == "unreviewed_auto"

    def test_unknown_status_rejected(self, client):
        resp = client.get("/api/queue", params={"status": "nonsense"})
        assert resp.status_code == 422
        assert "nonsense" in resp.json()["detail"]

    def test_pagination(self, client):
        first = client.get("/api/queue", params={"page_size": 2}).json()
        second = client.get("/api/queue", params={"page_size": 2, "page": 2}).json()
        third = client.get("/api/queue", params={"page_size": 2, "page": 3}).json()
        assert [i["entry_id"] for i in first["items"]] == [3, 4]
        assert [i["entry_id"] for i in second["items"]] == [1, 2]
        assert [i["entry_id"] for i in third["items"]] == [5]
        assert first["total"] == 5

    def test_page_size_bounds_enforced(self, client):
        assert client.get("/api/queue", params={"page_size": 501}).status_code == 422
        assert client.get("/api/queue", params={"page": 0}).status_code == 422

    def test_items_carry_summary_and_candidates(self, client):
        items = {i["entry_id"]: i for i in client.get("/api/queue").json()["items"]}
        frente = items[1]
        assert frente["summary"] == "A Frente Ampla reuniu opositores."
        assert frente["reasons"] == ["score_accepted"]
        cand = frente["candidates"][0]
        assert cand["label"] == "Frente Ampla"
        assert cand["qid_url"] == "https://www.wikidata.org/wiki/Q123"
        # Stored but absent from the corpus: no summary, no source path.
        assert items[5]["summary"] == ""
        assert items[5]["source_path"] is None


class TestEntryDetail:
    def test_full_detail(self, client):
        data = client.get("/api/entries/1").json()
        assert data["entry"]["title"] == "Frente Ampla"
        assert data["entry"]["summary"] == "A Frente Ampla reuniu opositores."
        assert data["forms"]["canonical"] == "Frente Ampla"
        assert data["forms"]["acronym"] is None
        assert data["record"]["qid"] == "Q123"
        assert data["record"]["qid_url"].endswith("/Q123")
        assert data["record"]["updated_at"].endswith("Z")
        assert data["decision"]["candidates"][0]["label"] == "Frente Ampla"

    def test_biographical_variants_listed(self, client):
        forms = client.get("/api/entries/3").json()["forms"]
        assert "Flecha de Lima" in forms["variants"]

    def test_single_token_name_has_no_variants(self, client):
        data = client.get("/api/entries/4").json()
        assert data["forms"]["variants"] == []
        assert data["record"]["status"] == "unreviewed_ambiguous"

    def test_corpus_only_entry(self, client):
        data = client.get("/api/entries/6").json()
        assert data["record"] is None
        assert data["decision"] is None
        assert data["entry"]["summary"] == "Nunca foi ligado."

    def test_store_only_entry(self, client):
        data = client.get("/api/entries/5").json()
        assert data["entry"]["summary"] == ""
        assert data["record"]["qid"] == "Q5"

    def test_unknown_entry_404(self, client):
        assert client.get("/api/entries/99").status_code == 404


class TestDecision:
    def test_confirm_moves_out_of_queue(self, client):
        resp = client.post(
            "/api/entries/1/decision",
            json={"verdict": "confirm", "reviewer": "ana"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["changed"] is True
        assert body["record"]["status"] == "confirmed"
        assert body["record"]["provenance"] == "human"
        assert body["record"]["reviewer"] == "ana"
        remaining = client.get(
            "/api/queue", params={"status": "unreviewed_auto"}
        ).json()
        assert [i["entry_id"] for i in remaining["items"]] == [3, 5]
        confirmed = client.get("/api/queue", params={"status": "confirmed"}).json()
        assert [i["entry_id"] for i in confirmed["items"]] == [1]

    def test_agreeing_reconfirmation_is_a_noop(self, client):
        client.post("/api/entries/1/decision",
                    json={"verdict": "confirm", "reviewer": "ana"})
        resp = client.post("/api/entries/1/decision",
                           json={"verdict": "confirm", "reviewer": "bia"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["changed"] is False
        assert body["record"]["reviewer"] == "ana"

    def test_conflicting_second_verdict_409(self, client):
        client.post("/api/entries/1/decision",
                    json={"verdict": "confirm", "reviewer": "ana"})
        resp = client.post("/api/entries/1/decision",
                           json={"verdict": "reject", "reviewer": "bia"})
        assert resp.status_code == 409
        detail = resp.json()["detail"]
        assert detail["record"]["status"] == "confirmed"
        assert detail["record"]["reviewer"] == "ana"
        # Nothing was overwritten.
        record = client.get("/api/entries/1").json()["record"]
        assert record["status"] == "confirmed"

    def test_manual_sets_qid(self, client):
        resp = client.post(
            "/api/entries/2/decision",
            json={"verdict": "manual", "qid": "Q888", "reviewer": "ana",
                  "note": "achei pelo apelido"},
        )
        assert resp.status_code == 200
        record = resp.json()["record"]
        assert record["status"] == "manual"
        assert record["qid"] == "Q888"
        assert record["note"] == "achei pelo apelido"

    def test_absent_clears_qid(self, client):
        resp = client.post("/api/entries/1/decision",
                           json={"verdict": "absent", "reviewer": "ana"})
        assert resp.json()["record"]["qid"] is None
        assert resp.json()["record"]["status"] == "confirmed_absent"

    def test_invalid_verdict_422(self, client):
        resp = client.post("/api/entries/1/decision", json={"verdict": "maybe"})
        assert resp.status_code == 422
        assert "confirm" in resp.json()["detail"]

    def test_manual_without_qid_422(self, client):
        resp = client.post("/api/entries/2/decision",
                           json={"verdict": "manual", "reviewer": "ana"})
        assert resp.status_code == 422

    def test_confirm_without_any_qid_422(self, client):
        resp = client.post("/api/entries/2/decision",
                           json={"verdict": "confirm", "reviewer": "ana"})
        assert resp.status_code == 422

    def test_unknown_entry_404(self, client):
        resp = client.post("/api/entries/99/decision", json={"verdict": "confirm"})
        assert resp.status_code == 404
