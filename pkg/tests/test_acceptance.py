"""End-to-end guarantees the pipeline is expected to keep.

One class per guarantee: dump writer/parser agreement, index-vs-oracle
equivalence, sitelink-only auto-mapping, acronym extraction over the
frozen title catalog, surname variants, candidate filters, typo
recovery, the pinned 40-entry corpus run, review metrics arithmetic,
TSV round-tripping, and offline operation.
"""

from __future__ import annotations

import io
import random
import socket
import time
from datetime import timedelta
from fractions import Fraction

import pytest

import oracles
import scenario40
from conftest import PINNED_NOW, pinned_clock, write_wiki_dumps
from dhbb_linker.corpus import Entry, Nature
from dhbb_linker.dump_index import (
    PAGE_PROPS_SCHEMA,
    PAGE_SCHEMA,
    REDIRECT_SCHEMA,
    TableSchema,
    build_index,
    parse_sql_dump,
)
from dhbb_linker.evaluator import (
    AdjudicationRecord,
    Stratum,
    Verdict,
    compute_metrics,
    render_fraction,
)
from dhbb_linker.fixtures import CannedTransport, write_sql_dump
from dhbb_linker.linker import (
    Candidate,
    DecisionStatus,
    LinkerConfig,
    Source,
    filter_candidates,
    generate_candidates,
    link_corpus,
    link_entry,
)
from dhbb_linker.normalize import (
    bounded_edit_distance,
    extract_acronym,
    canonicalize,
    person_variants,
    title_forms,
)
from dhbb_linker.store import MappingStore, Provenance, Status, export_tsv, import_tsv
from dhbb_linker.wd_client import EntityRecord, WikidataClient


class TestDumpWriterParserAgreement:
    """1,000 awkward rows survive a serialize/parse round trip, fast."""

    SCHEMA = TableSchema("torture", ("id", "num", "ratio", "text"))

    @staticmethod
    def tricky_rows(n: int, seed: int) -> list[tuple]:
        rng = random.Random(seed)
        pool = [
            "O'Neill",
            'quote"d',
            "tab\there",
            "line\nbreak",
            "back\\slash",
            "carriage\rreturn",
            "nul\x00byte",
            "acentuação àéîõü ç",
            "emoji 🦜 meio ½",
            "semi;colon),('trap')",
            "-- not a comment",
            "INSERT INTO `torture` VALUES (1)",
        ]
        rows = []
        for i in range(n):
            rows.append(
                (
                    i,
                    rng.randrange(-(10**9), 10**9),
                    rng.choice([None, 0.5, rng.random()]),
                    f"{rng.choice(pool)} #{rng.randrange(10**6)}",
                )
            )
        return rows

    def test_round_trip_identical_and_fast(self, tmp_path):
        rows = self.tricky_rows(1000, seed=20260301)
        path = tmp_path / "torture.sql"
        start = time.perf_counter()
        write_sql_dump(rows, self.SCHEMA, path)
        parsed = [t.values for t in parse_sql_dump(path, self.SCHEMA)]
        elapsed = time.perf_counter() - start
        assert parsed == rows
        assert elapsed < 1.0


class TestIndexMatchesLinearScan:
    """Index lookups agree with a naive per-query re-scan of the rows."""

    HOP4 = "Q31337"

    @staticmethod
    def planted_rows():
        # A five-redirect chain into content plus a two-cycle, with
        # page ids far above anything the generator hands out.
        def page_row(pid, title, is_redirect):
            return (pid, 0, title, is_redirect, 0, 0.0,
                    "20240101000000", None, 1, 10, "wikitext", None)

        pages, redirects, props = [], [], []
        chain = [f"Elo_{i}" for i in range(6)]
        pages.append(page_row(800_000, chain[-1], 0))
        props.append((800_000, "wikibase_item", TestIndexMatchesLinearScan.HOP4, None))
        for i, (here, there) in enumerate(zip(chain[:-1], chain[1:])):
            pid = 800_001 + i
            pages.append(page_row(pid, here, 1))
            redirects.append((pid, 0, there, "", None))
        for pid, (here, there) in ((800_010, ("Ciclo_A", "Ciclo_B")),
                                   (800_011, ("Ciclo_B", "Ciclo_A"))):
            pages.append(page_row(pid, here, 1))
            redirects.append((pid, 0, there, "", None))
        return pages, redirects, props, chain

    def test_every_title_in_the_universe(self, tmp_path):
        pages, redirects, props, queries = oracles.synthetic_wiki(20260301, 600)
        planted_pages, planted_redirects, planted_props, chain = self.planted_rows()
        pages += planted_pages
        redirects += planted_redirects
        props += planted_props
        queries += [*chain, "Ciclo_A", "Ciclo_B", "elo 1", "ciclo a"]

        total_rows = len(pages) + len(redirects) + len(props)
        assert total_rows <= 10_000

        start = time.perf_counter()
        dumps = write_wiki_dumps(tmp_path, pages, redirects, props)
        index = build_index(*dumps)
        mismatches = [
            (title, index.lookup_title(title),
             oracles.naive_index_lookup(pages, redirects, props, title))
            for title in queries
        ]
        mismatches = [(t, got, want) for t, got, want in mismatches if got != want]
        elapsed = time.perf_counter() - start

        assert mismatches == []
        assert elapsed < 5.0

        # The planted shapes behave as documented: resolvable from four
        # hops out, absent from five, absent for the cycle.
        assert index.lookup_title(chain[1]) == self.HOP4
        assert index.lookup_title(chain[0]) is None
        assert index.lookup_title("Ciclo_A") is None
        assert index.lookup_title("Ciclo_B") is None


class TestSitelinkOnlyAutoMapping:
    """A title found only in the local index still auto-maps."""

    def test_doi_codi_via_sitelink_channel(self, tmp_path):
        pages = [scenario40.page(1, "DOI-CODI")]
        props = [scenario40.prop(1, "Q5205864")]
        dumps = write_wiki_dumps(tmp_path, pages, [], props)
        index = build_index(*dumps)

        transport = CannedTransport()  # every search comes back empty
        client = WikidataClient(transport)
        entry = Entry(5701, "DOI-CODI", Nature.THEMATIC, "", "5701.text")
        decision = link_entry(entry, {"pt": index}, client, LinkerConfig())

        assert decision.status is DecisionStatus.AUTO_MAPPED
        assert decision.chosen == "Q5205864"
        top = decision.candidates[0]
        assert top.source is Source.SITELINK
        assert top.raw_score == 1.0
        assert transport.calls > 0  # the empty search channel was consulted


# Frozen title catalog: id, title as published, parenthesized acronym.
TITLE_CATALOG = (
    (11602, "Central Geral dos Trabalhadores do Brasil (CGTB)", "CGTB"),
    (11603, "Conselho de Comunicação Social (CCS)", "CCS"),
    (11604, "Coordenação Nacional de Lutas (Conlutas)", "Conlutas"),
    (11605, "EXTRA", None),
    (11606, "Horário Gratuito de Propaganda Eleitoral (HGPE)", "HGPE"),
    (11607, "Lei de Responsabilidade Fiscal", None),
    (11608, "Nova Central Sindical de Trabalhadores (NCST)", "NCST"),
    (11609, "Parcerias Público-Privadas (PPP)", "PPP"),
    (11610, "PARTIDO DA CAUSA OPERÁRIA (PCO)", "PCO"),
    (11611, "PARTIDO DA REPÚBLICA (PR)", "PR"),
    (11612, "PARTIDO HUMANISTA DA SOLIDARIEDADE (PHS)", "PHS"),
    (11613, "PARTIDO PROGRESSISTA (PP)", "PP"),
    (11614, "PARTIDO RENOVADOR TRABALHISTA BRASILEIRO (PRTB)", "PRTB"),
    (11615, "PARTIDO REPUBLICANO BRASILEIRO (PRB)", "PRB"),
    (11616, "PARTIDO SOCIAL DEMOCRATA CRISTÃO (PSDC)", "PSDC"),
    (11617, "PARTIDO SOCIAL LIBERAL (PSL)", "PSL"),
    (11618, "PARTIDO SOCIALISMO E LIBERDADE (PSOL)", "PSOL"),
    (11619, "PARTIDO TRABALHISTA CRISTÃO (PTC)", "PTC"),
    (11620, "Pensamento Nacional das Bases Empresariais (PNBE)", "PNBE"),
)


class TestAcronymExtractionCatalog:
    def test_exact_acronyms(self):
        for _, title, expected in TITLE_CATALOG:
            base, acronym = extract_acronym(title)
            assert acronym == expected, title

    def test_suffix_count_is_data_derived(self):
        with_suffix = [t for _, t, a in TITLE_CATALOG if a is not None]
        without = [t for _, t, a in TITLE_CATALOG if a is None]
        assert len(with_suffix) == 17
        assert without == ["EXTRA", "Lei de Responsabilidade Fiscal"]

    def test_bases_reconstruct_originals(self):
        for _, title, expected in TITLE_CATALOG:
            base, acronym = extract_acronym(title)
            rebuilt = f"{base} ({acronym})" if acronym else base
            assert rebuilt == title

    def test_canonical_forms_differ_only_in_case(self):
        for _, title, _ in TITLE_CATALOG:
            canonical = canonicalize(title)
            assert canonical.lower() == " ".join(title.split()).lower()

    def test_acronym_survives_canonicalization(self):
        canonical = canonicalize("PARTIDO DA CAUSA OPERÁRIA (PCO)")
        assert canonical == "Partido da Causa Operária (PCO)"


class TestSurnameVariants:
    GIVEN = ("Paulo", "Maria", "José", "Ana", "Carlos", "Joana", "Pedro",
             "Luís", "Rita", "Jorge", "Tarso", "Heitor")
    SURNAME = ("Silva", "Souza", "Lima", "Flecha", "Campos", "Prado",
               "Moraes", "Barros", "Teles", "Dutra")
    PARTICLES = ("de", "da", "do", "das", "dos", "e")

    @classmethod
    def synthetic_names(cls, n: int, seed: int) -> list[str]:
        rng = random.Random(seed)
        names = []
        for _ in range(n):
            tokens = [rng.choice(cls.GIVEN)]
            for _ in range(rng.randrange(1, 5)):
                if rng.random() < 0.35:
                    tokens.append(rng.choice(cls.PARTICLES))
                tokens.append(rng.choice(cls.SURNAME))
            names.append(" ".join(tokens))
        return names

    def test_flecha_de_lima_variant_present(self):
        assert "Flecha de Lima" in person_variants("Paulo Tarso Flecha de Lima")

    def test_matches_brute_force_on_200_names(self):
        for name in self.synthetic_names(200, seed=20260301):
            assert person_variants(name) == oracles.variant_oracle(name), name


class TestCandidateFilters:
    CFG = LinkerConfig()

    def test_disambiguation_pages_always_removed(self):
        cands = [Candidate("Q1", Source.SITELINK, 1.0)]
        entities = {"Q1": EntityRecord("Q1", instance_of=("Q4167410",))}
        for nature in (Nature.THEMATIC, Nature.BIOGRAPHICAL):
            assert filter_candidates(cands, entities, nature, self.CFG) == []

    def test_thematic_candidates_from_other_countries_removed(self):
        cands = [Candidate("Q1", Source.SEARCH, 0.85)]
        entities = {"Q1": EntityRecord("Q1", country=("Q45",))}
        assert filter_candidates(cands, entities, Nature.THEMATIC, self.CFG) == []

    def test_candidates_without_country_claim_kept_unchanged(self):
        cands = [Candidate("Q1", Source.SEARCH, 0.85)]
        entities = {"Q1": EntityRecord("Q1", country=None)}
        kept = filter_candidates(cands, entities, Nature.THEMATIC, self.CFG)
        assert [(c.qid, c.final_score, c.penalties) for c in kept] == [
            ("Q1", 0.85, ())
        ]


class TestTypoRecovery:
    def test_single_transposition_recovered(self):
        assert bounded_edit_distance("Patrionovista", "Patrianovista", 1) == 1

    def test_recovery_reaches_the_candidate_pool(self):
        from dhbb_linker.wd_client import SearchHit

        client = WikidataClient(
            CannedTransport(
                searches={"Patrionovista": [SearchHit("Q16", "Patrianovista")]}
            )
        )
        cands = generate_candidates(
            title_forms("Patrionovista"), Nature.THEMATIC, {}, client, LinkerConfig()
        )
        assert [(c.qid, c.source, c.raw_score) for c in cands] == [
            ("Q16", Source.FUZZY, 0.6)
        ]

    def test_distance_agrees_with_unbounded_dp_on_1000_pairs(self):
        rng = random.Random(20260301)
        alphabet = "abcdeáéàçõ ESz-"
        for _ in range(1000):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 13)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 13)))
            expected = oracles.dl_oracle(
                oracles_fold(a), oracles_fold(b)
            )
            assert bounded_edit_distance(a, b, 64) == expected, (a, b)


def oracles_fold(text: str) -> str:
    from dhbb_linker.normalize import fold_diacritics

    return fold_diacritics(text)


class TestFrozenCorpusRun:
    """The 40-entry fixture corpus reproduces its pinned outcomes,
    byte for byte, on fresh and resumed runs."""

    def run_pipeline(self, path, entries, indexes, first_batch=None):
        store = MappingStore(path, clock=pinned_clock)
        client = WikidataClient(
            CannedTransport(
                searches=scenario40.SEARCHES, entities=scenario40.ENTITIES
            )
        )
        if first_batch:
            link_corpus(entries[:first_batch], indexes, client, store)
        return link_corpus(entries, indexes, client, store)

    def test_pinned_outcomes_and_byte_identity(self, tmp_path, corpus40, indexes40):
        entries = corpus40.entries
        path_a = tmp_path / "a.db"
        run = self.run_pipeline(path_a, entries, indexes40)

        outcomes = {d.entry_id: (d.status.value, d.chosen) for d in run.decisions}
        assert outcomes == scenario40.EXPECTED
        assert run.failures == ()
        assert run.skipped == 0

        report = run.report.as_dict()
        for nature, expected in scenario40.EXPECTED_COUNTS.items():
            got = {k: report[nature][k] for k in expected}
            assert got == expected, nature

        path_b = tmp_path / "b.db"
        self.run_pipeline(path_b, entries, indexes40)
        assert path_a.read_bytes() == path_b.read_bytes()

        path_c = tmp_path / "c.db"
        resumed = self.run_pipeline(path_c, entries, indexes40, first_batch=17)
        assert resumed.skipped == 17
        assert path_a.read_bytes() == path_c.read_bytes()

    def test_store_contents_match_decisions(self, tmp_path, corpus40, indexes40):
        path = tmp_path / "d.db"
        self.run_pipeline(path, corpus40.entries, indexes40)
        store = MappingStore(path)
        status_for = {
            "auto_mapped": Status.UNREVIEWED_AUTO,
            "ambiguous": Status.UNREVIEWED_AMBIGUOUS,
            "not_found": Status.UNREVIEWED_NOT_FOUND,
        }
        for entry_id, (status, qid) in scenario40.EXPECTED.items():
            record = store.get(entry_id)
            assert record.status is status_for[status], entry_id
            assert record.qid == qid, entry_id
            assert record.provenance is Provenance.PIPELINE
            assert record.updated_at == PINNED_NOW


class TestReviewMetricsArithmetic:
    def test_4_of_25_wrong_is_exactly_016(self):
        batch = [
            AdjudicationRecord(
                i + 1,
                Stratum.THEMATIC_MAPPED,
                Verdict.AUTO_WRONG if i < 4 else Verdict.AUTO_CORRECT,
            )
            for i in range(25)
        ]
        m = compute_metrics(batch).metrics(Stratum.THEMATIC_MAPPED)
        assert m.sample_size == 25
        assert m.auto_wrong == 4
        assert m.rate == Fraction(4, 25)
        assert render_fraction(m.rate) == "0.16"

    def test_7_of_25_found_is_exactly_028(self):
        batch = [
            AdjudicationRecord(
                i + 1,
                Stratum.THEMATIC_UNMAPPED,
                Verdict.HUMAN_FOUND if i < 7 else Verdict.HUMAN_NOT_FOUND,
                found_qid=f"Q{i + 1}" if i < 7 else None,
            )
            for i in range(25)
        ]
        m = compute_metrics(batch).metrics(Stratum.THEMATIC_UNMAPPED)
        assert m.rate == Fraction(7, 25)
        assert render_fraction(m.rate) == "0.28"

    def test_rendered_report_quotes_both_rates(self):
        batch = [
            AdjudicationRecord(
                i + 1,
                Stratum.THEMATIC_MAPPED,
                Verdict.AUTO_WRONG if i < 4 else Verdict.AUTO_CORRECT,
            )
            for i in range(25)
        ] + [
            AdjudicationRecord(
                100 + i,
                Stratum.THEMATIC_UNMAPPED,
                Verdict.HUMAN_FOUND if i < 7 else Verdict.HUMAN_NOT_FOUND,
                found_qid=f"Q{i}" if i < 7 else None,
            )
            for i in range(25)
        ]
        text = compute_metrics(batch).render()
        assert "0.16" in text
        assert "0.28" in text


class TestMappingTsvRoundTrip:
    @staticmethod
    def random_records(n: int, seed: int) -> list:
        from dhbb_linker.store import MappingRecord

        rng = random.Random(seed)
        textpool = (
            "Frente Ampla",
            "nota com\ttab",
            "linha\nquebrada",
            "fim\r\nCRLF",
            'aspas "duplas"',
            "acentuação çãõé à ü",
            "ponto-e-vírgula; e (parênteses)",
            "espaços   múltiplos",
        )
        statuses = list(Status)
        records = []
        for i in range(1, n + 1):
            status = rng.choice(statuses)
            records.append(
                MappingRecord(
                    entry_id=i,
                    title=f"{rng.choice(textpool)} #{i}",
                    nature=rng.choice(("thematic", "biographical")),
                    qid=rng.choice((None, f"Q{rng.randrange(1, 10**7)}")),
                    status=status,
                    confidence=rng.choice((None, 0.5, round(rng.random(), 6))),
                    provenance=rng.choice(list(Provenance)),
                    reviewer=rng.choice((None, "ana", "bia\tcom tab")),
                    updated_at=PINNED_NOW + timedelta(seconds=i),
                    note=rng.choice((None, *textpool)),
                )
            )
        return records

    def test_import_of_export_is_identity_on_500_records(self):
        records = self.random_records(500, seed=20260301)
        buf = io.StringIO()
        assert export_tsv(records, buf) == 500
        back = list(import_tsv(io.StringIO(buf.getvalue())))
        assert back == records


class TestOfflineOperation:
    def test_outbound_connections_are_refused(self):
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
            with pytest.raises(RuntimeError, match="offline"):
                sock.connect(("127.0.0.1", 9))

    def test_remote_transport_cannot_reach_the_network(self):
        from dhbb_linker.wd_client import ClientError, HttpTransport

        transport = HttpTransport()
        with pytest.raises((ClientError, RuntimeError)):
            transport.get({"action": "wbsearchentities", "search": "x"})
