"""Candidate generation, filtering, scoring, and the link decision rule.

Candidates come from the local sitelink indexes (exact title, acronym
base, redirects, person-name variants) and from remote search (exact
label/alias, acronym, fuzzy). Filters encode the observed failure
modes: disambiguation pages are never valid targets, thematic entries
must not match same-named organizations in other countries, and
foreign-citizenship people are demoted rather than dropped. The
decision rule is a threshold plus an ambiguity margin; everything in
between lands in the human review queue.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Entry, Nature
from .dump_index import SitelinkIndex
from .normalize import FUNCTION_WORDS, TitleForms, bounded_edit_distance, fold_diacritics, title_forms
from .store import MappingRecord, MappingStore, Provenance, Status, UpsertOutcome
from .wd_client import EntityRecord, SearchHit, WikidataClient

log = logging.getLogger(__name__)


class Source(str, Enum):
    SITELINK = "sitelink"
    REDIRECT = "redirect"
    SEARCH = "search"
    ACRONYM = "acronym"
    FUZZY = "fuzzy"


class DecisionStatus(str, Enum):
    AUTO_MAPPED = "auto_mapped"
    AMBIGUOUS = "ambiguous"
    NOT_FOUND = "not_found"


_QID_NUM_RE = re.compile(r"\d+")


def qid_number(qid: str) -> int:
    m = _QID_NUM_RE.search(qid)
    return int(m.group()) if m else 0


@dataclass(frozen=True)
class Candidate:
    qid: str
    source: Source
    raw_score: float
    penalties: tuple[tuple[str, float], ...] = ()
    evidence: tuple[str, ...] = ()

    @property
    def final_score(self) -> float:
        return max(0.0, self.raw_score - sum(amount for _, amount in self.penalties))

    def sort_key(self) -> tuple[float, int]:
        return (-self.final_score, qid_number(self.qid))


@dataclass(frozen=True)
class LinkDecision:
    entry_id: int
    status: DecisionStatus
    chosen: str | None
    candidates: tuple[Candidate, ...]
    reasons: tuple[str, ...] = ()

    def to_payload(self) -> dict:
        """JSON-friendly form stored alongside the mapping for review."""
        return {
            "entry_id": self.entry_id,
            "status": self.status.value,
            "chosen": self.chosen,
            "reasons": list(self.reasons),
            "candidates": [
                {
                    "qid": c.qid,
                    "source": c.source.value,
                    "raw_score": c.raw_score,
                    "final_score": c.final_score,
                    "penalties": [list(p) for p in c.penalties],
                    "evidence": list(c.evidence),
                }
                for c in self.candidates
            ],
        }


class LinkerError(Exception):
    pass


class MissingEntityRecord(LinkerError):
    def __init__(self, qid: str):
        super().__init__(f"no entity record fetched for candidate {qid}")
        self.qid = qid


@dataclass(frozen=True)
class LinkerConfig:
    """All tunables of the linking pipeline; overridable via config file."""

    brazil_qid: str = "Q155"
    disambiguation_class_qids: tuple[str, ...] = ("Q4167410",)
    accept_threshold: float = 0.75
    ambiguity_margin: float = 0.1
    fuzzy_max_edits: int = 1
    fuzzy_min_length: int = 6
    wikis: tuple[str, ...] = ("pt", "en")
    search_language: str = "pt"
    search_fallback_language: str = "en"
    search_limit: int = 20
    score_sitelink_canonical: float = 1.0
    score_sitelink_base: float = 0.95
    score_redirect: float = 0.9
    score_search: float = 0.85
    score_acronym: float = 0.7
    score_fuzzy: float = 0.6
    variant_rank_decrement: float = 0.05
    foreign_citizenship_penalty: float = 0.3

    def __post_init__(self) -> None:
        if not 0 < self.accept_threshold <= 1:
            raise ValueError("accept_threshold must be in (0, 1]")
        if self.ambiguity_margin < 0:
            raise ValueError("ambiguity_margin must be non-negative")
        if self.fuzzy_max_edits < 0:
            raise ValueError("fuzzy_max_edits must be non-negative")


_LIST_FIELDS = {"disambiguation_class_qids", "wikis"}
_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(LinkerConfig)}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment, lists are comma-separated."""
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"config line {line_no}: unknown key {key!r}")
        spec = _CONFIG_FIELDS[key]
        if key in _LIST_FIELDS:
            values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif spec.type in ("int", int):
            values[key] = int(value)
        elif spec.type in ("float", float):
            values[key] = float(value)
        else:
            values[key] = value
    return values


def load_config(path: str | Path | None = None, **overrides) -> LinkerConfig:
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return LinkerConfig(**values)


def dump_config(config: LinkerConfig) -> str:
    lines = []
    for f in dataclasses.fields(LinkerConfig):
        value = getattr(config, f.name)
        if f.name in _LIST_FIELDS:
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


# -- candidate generation ------------------------------------------------

_warned_wikis: set[str] = set()  # one missing-index warning per wiki per process


def _merge(into: dict[str, Candidate], cand: Candidate) -> None:
    # Same QID from several channels: keep the best raw score, pool evidence.
    old = into.get(cand.qid)
    if old is None:
        into[cand.qid] = cand
        return
    best, other = (cand, old) if cand.raw_score > old.raw_score else (old, cand)
    evidence = tuple(dict.fromkeys(best.evidence + other.evidence))
    into[cand.qid] = replace(best, evidence=evidence)


def _index_probes(forms: TitleForms, nature: Nature, config: LinkerConfig):
    """Yield (text, direct_score, variant_rank, label) probes, best first."""
    yield forms.canonical, config.score_sitelink_canonical, 0, "canonical"
    if forms.original != forms.canonical:
        yield forms.original, config.score_sitelink_canonical, 0, "original"
    if forms.base != forms.canonical:
        yield forms.base, config.score_sitelink_base, 0, "base"
    if nature is Nature.BIOGRAPHICAL:
        for rank, variant in enumerate(forms.variants):
            if rank == 0:
                continue  # rank 0 is the full name, already probed
            dec = config.variant_rank_decrement * rank
            yield variant, config.score_sitelink_canonical - dec, rank, f"variant[{rank}]"


def _search_exact(
    hits: Sequence[SearchHit], targets: set[str]
) -> Iterable[tuple[SearchHit, str]]:
    for hit in hits:
        for text in (hit.match_text, hit.label):
            if text and fold_diacritics(text) in targets:
                yield hit, text
                break


def generate_candidates(
    forms: TitleForms,
    nature: Nature,
    indexes: Mapping[str, SitelinkIndex],
    client: WikidataClient | None,
    config: LinkerConfig = LinkerConfig(),
) -> list[Candidate]:
    """All plausible QIDs for a title, each with a source-quality raw score.

    Channels, best first: exact sitelink on the canonical title, on the
    acronym-stripped base, via redirect; remote search with an exact
    label or alias match; remote search on the acronym; fuzzy match of
    search hits within the edit bound. Person-name variants repeat the
    probes with a per-rank decrement. Duplicate QIDs are merged.
    """
    if not indexes and client is None:
        raise LinkerError("need at least one sitelink index or a client")
    merged: dict[str, Candidate] = {}

    for wiki in config.wikis:
        index = indexes.get(wiki)
        if index is None:
            if indexes and wiki not in _warned_wikis:
                _warned_wikis.add(wiki)
                log.warning("no %swiki index loaded; skipping", wiki)
            continue
        for text, direct_score, rank, label in _index_probes(forms, nature, config):
            result = index.resolve(text)
            if result.qid is None:
                continue
            if result.hops == 0:
                raw, source = direct_score, Source.SITELINK
            else:
                dec = config.variant_rank_decrement * rank
                raw, source = config.score_redirect - dec, Source.REDIRECT
            _merge(
                merged,
                Candidate(
                    qid=result.qid,
                    source=source,
                    raw_score=raw,
                    evidence=(
                        f"{label}:{text}",
                        f"{wiki}wiki:{result.final_title}"
                        + (f" ({result.hops} redirect hops)" if result.hops else ""),
                    ),
                ),
            )

    if client is None:
        return _ranked(merged)

    search_probes: list[tuple[str, int]] = [(forms.base, 0)]
    if nature is Nature.BIOGRAPHICAL:
        search_probes += [(v, r) for r, v in enumerate(forms.variants) if r > 0]

    fuzzy_pool: list[SearchHit] = []
    for query, rank in search_probes:
        hits = client.search_entities(
            query,
            language=config.search_language,
            limit=config.search_limit,
            fallback_language=config.search_fallback_language,
        )
        if rank == 0:
            fuzzy_pool = hits
        targets = {fold_diacritics(query)}
        if rank == 0:
            targets.add(fold_diacritics(forms.canonical))
        for hit, matched in _search_exact(hits, targets):
            _merge(
                merged,
                Candidate(
                    qid=hit.qid,
                    source=Source.SEARCH,
                    raw_score=config.score_search - config.variant_rank_decrement * rank,
                    evidence=(f"search:{query}", f"matched:{matched}"),
                ),
            )

    if forms.acronym:
        hits = client.search_entities(
            forms.acronym,
            language=config.search_language,
            limit=config.search_limit,
            fallback_language=config.search_fallback_language,
        )
        target = fold_diacritics(forms.acronym)
        for hit in hits:
            if target in (fold_diacritics(hit.match_text), fold_diacritics(hit.label)):
                _merge(
                    merged,
                    Candidate(
                        qid=hit.qid,
                        source=Source.ACRONYM,
                        raw_score=config.score_acronym,
                        evidence=(f"acronym:{forms.acronym}", f"matched:{hit.label}"),
                    ),
                )

    folded_title = fold_diacritics(forms.canonical)
    if len(folded_title) >= config.fuzzy_min_length and config.fuzzy_max_edits > 0:
        for hit in fuzzy_pool:
            if hit.qid in merged:
                continue
            best: tuple[int, str] | None = None
            for text in (hit.match_text, hit.label):
                if not text:
                    continue
                d = bounded_edit_distance(folded_title, text, config.fuzzy_max_edits)
                if d is not None and d > 0 and (best is None or d < best[0]):
                    best = (d, text)
            if best is not None:
                _merge(
                    merged,
                    Candidate(
                        qid=hit.qid,
                        source=Source.FUZZY,
                        raw_score=config.score_fuzzy,
                        evidence=(
                            f"fuzzy:{forms.canonical}",
                            f"matched:{best[1]} (distance {best[0]})",
                        ),
                    ),
                )

    return _ranked(merged)


def _ranked(merged: dict[str, Candidate]) -> list[Candidate]:
    return sorted(merged.values(), key=Candidate.sort_key)


# -- filtering -----------------------------------------------------------


def filter_candidates(
    candidates: Sequence[Candidate],
    entities: Mapping[str, EntityRecord],
    nature: Nature,
    config: LinkerConfig = LinkerConfig(),
) -> list[Candidate]:
    """Drop or demote candidates using entity class and country claims.

    Disambiguation-class items are removed for both natures. Thematic:
    candidates whose country claim exists and excludes Brazil are
    removed; a missing country claim is not evidence against a match, so
    those pass through untouched. Biographical: foreign citizenship is a
    score penalty, not removal. Input is never mutated.
    """
    disamb = set(config.disambiguation_class_qids)
    out: list[Candidate] = []
    for cand in candidates:
        entity = entities.get(cand.qid)
        if entity is None:
            raise MissingEntityRecord(cand.qid)
        if disamb & set(entity.instance_of):
            continue
        if nature is Nature.THEMATIC:
            country = entity.country
            if country is not None and len(country) > 0 and config.brazil_qid not in country:
                continue
            out.append(cand)
        else:
            citizenship = entity.citizenship
            if (
                citizenship is not None
                and len(citizenship) > 0
                and config.brazil_qid not in citizenship
            ):
                cand = replace(
                    cand,
                    penalties=cand.penalties
                    + (("foreign_citizenship", config.foreign_citizenship_penalty),),
                )
            out.append(cand)
    out.sort(key=Candidate.sort_key)
    return out


# -- decision ------------------------------------------------------------


def score_and_decide(
    entry_id: int,
    candidates: Sequence[Candidate],
    config: LinkerConfig = LinkerConfig(),
    extra_reasons: Sequence[str] = (),
) -> LinkDecision:
    """Threshold-and-margin rule over the ranked candidate list.

    Accept the top candidate only when it clears accept_threshold and
    leads the runner-up by at least ambiguity_margin; otherwise the
    entry is ambiguous (or not_found when no candidates survive).
    """
    ranked = tuple(sorted(candidates, key=Candidate.sort_key))
    reasons = list(extra_reasons)
    if not ranked:
        if not reasons:
            reasons.append("no_candidates")
        return LinkDecision(
            entry_id=entry_id,
            status=DecisionStatus.NOT_FOUND,
            chosen=None,
            candidates=(),
            reasons=tuple(reasons),
        )
    top = ranked[0]
    if top.final_score < config.accept_threshold:
        reasons.append("below_threshold")
        status, chosen = DecisionStatus.AMBIGUOUS, None
    elif len(ranked) > 1 and top.final_score - ranked[1].final_score < config.ambiguity_margin:
        reasons.append("margin_too_small")
        status, chosen = DecisionStatus.AMBIGUOUS, None
    else:
        reasons.append("score_accepted")
        status, chosen = DecisionStatus.AUTO_MAPPED, top.qid
    return LinkDecision(
        entry_id=entry_id,
        status=status,
        chosen=chosen,
        candidates=ranked,
        reasons=tuple(reasons),
    )


# -- per-entry pipeline --------------------------------------------------


def _content_tokens(text: str) -> set[str]:
    return {
        t for t in fold_diacritics(text).split() if t not in FUNCTION_WORDS and len(t) > 1
    }


def sub_concept_suspect(forms: TitleForms, hits: Sequence[SearchHit]) -> bool:
    """True when search hits look like broader concepts containing the title.

    Flags titles that substantially overlap a hit label without matching
    it, the signature of an entry that exists only as a section of a
    wider item. Pure heuristic for the gap report; never links anything.
    """
    title_tokens = _content_tokens(forms.base)
    if not title_tokens:
        return False
    needed = max(2, math.ceil(len(title_tokens) / 2))
    for hit in hits:
        for text in (hit.label, hit.match_text):
            if not text:
                continue
            overlap = title_tokens & _content_tokens(text)
            if len(overlap) >= needed and fold_diacritics(text) != fold_diacritics(
                forms.base
            ):
                return True
    return False


def link_entry(
    entry: Entry,
    indexes: Mapping[str, SitelinkIndex],
    client: WikidataClient | None,
    config: LinkerConfig = LinkerConfig(),
) -> LinkDecision:
    """Generate, enrich, filter, and decide for one entry."""
    forms = title_forms(entry.title, biographical=entry.nature is Nature.BIOGRAPHICAL)
    candidates = generate_candidates(forms, entry.nature, indexes, client, config)

    entities: dict[str, EntityRecord] = {}
    if candidates:
        qids = [c.qid for c in candidates]
        if client is not None:
            fetch = client.fetch_entities(qids)
            entities.update(fetch.entities)
        for qid in qids:
            # No claim data available: treat as claimless, filters keep it.
            entities.setdefault(qid, EntityRecord(qid=qid))

    filtered = filter_candidates(candidates, entities, entry.nature, config)

    extra: list[str] = []
    if candidates and not filtered:
        extra.append("all_candidates_filtered")
    if not filtered and client is not None:
        try:
            hits = client.search_entities(
                forms.base,
                language=config.search_language,
                limit=config.search_limit,
                fallback_language=config.search_fallback_language,
            )
        except Exception:  # diagnostics only; never fail the entry for this
            hits = []
        if sub_concept_suspect(forms, hits):
            extra.append("sub_concept_suspect")

    return score_and_decide(entry.id, filtered, config, extra_reasons=extra)


# -- corpus run ----------------------------------------------------------

_DECISION_TO_STATUS = {
    DecisionStatus.AUTO_MAPPED: Status.UNREVIEWED_AUTO,
    DecisionStatus.AMBIGUOUS: Status.UNREVIEWED_AMBIGUOUS,
    DecisionStatus.NOT_FOUND: Status.UNREVIEWED_NOT_FOUND,
}

MAPPED_STATUSES = frozenset({Status.UNREVIEWED_AUTO, Status.CONFIRMED, Status.MANUAL})
AMBIGUOUS_STATUSES = frozenset({Status.UNREVIEWED_AMBIGUOUS})


def decision_to_record(entry: Entry, decision: LinkDecision) -> MappingRecord:
    top = decision.candidates[0] if decision.candidates else None
    return MappingRecord(
        entry_id=entry.id,
        title=entry.title,
        nature=entry.nature.value,
        qid=decision.chosen,
        status=_DECISION_TO_STATUS[decision.status],
        confidence=round(top.final_score, 6) if top is not None else None,
        provenance=Provenance.PIPELINE,
    )


@dataclass(frozen=True)
class NatureCounts:
    mapped: int = 0
    ambiguous: int = 0
    unmapped: int = 0

    @property
    def total(self) -> int:
        return self.mapped + self.ambiguous + self.unmapped

    @property
    def coverage(self) -> float | None:
        return self.mapped / self.total if self.total else None


@dataclass(frozen=True)
class CoverageReport:
    by_nature: Mapping[str, NatureCounts]

    def counts(self, nature: str) -> NatureCounts:
        return self.by_nature.get(nature, NatureCounts())

    def render(self) -> str:
        lines = [f"{'nature':<14} {'mapped':>7} {'ambiguous':>10} {'unmapped':>9} {'coverage':>9}"]
        for nature in sorted(self.by_nature):
            c = self.by_nature[nature]
            cov = f"{c.coverage:.3f}" if c.coverage is not None else "-"
            lines.append(
                f"{nature:<14} {c.mapped:>7} {c.ambiguous:>10} {c.unmapped:>9} {cov:>9}"
            )
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            nature: {
                "mapped": c.mapped,
                "ambiguous": c.ambiguous,
                "unmapped": c.unmapped,
                "coverage": c.coverage,
            }
            for nature, c in sorted(self.by_nature.items())
        }


def compute_coverage(store: MappingStore, entries: Iterable[Entry]) -> CoverageReport:
    """Bucket every corpus entry by its current mapping status.

    Reviewed statuses count with their outcome (confirmed and manual are
    mapped; rejected and confirmed_absent are unmapped), so the report
    stays meaningful as review progresses.
    """
    buckets: dict[str, dict[str, int]] = {}
    for entry in entries:
        nature = entry.nature.value
        b = buckets.setdefault(nature, {"mapped": 0, "ambiguous": 0, "unmapped": 0})
        record = store.get(entry.id)
        if record is not None and record.status in MAPPED_STATUSES:
            b["mapped"] += 1
        elif record is not None and record.status in AMBIGUOUS_STATUSES:
            b["ambiguous"] += 1
        else:
            b["unmapped"] += 1
    return CoverageReport(
        by_nature={n: NatureCounts(**c) for n, c in buckets.items()}
    )


@dataclass(frozen=True)
class LinkFailure:
    entry_id: int
    error: str


@dataclass(frozen=True)
class LinkRun:
    decisions: tuple[LinkDecision, ...]
    report: CoverageReport
    failures: tuple[LinkFailure, ...]
    skipped: int
    conflicts: tuple[UpsertOutcome, ...] = ()


def link_corpus(
    entries: Sequence[Entry],
    indexes: Mapping[str, SitelinkIndex],
    client: WikidataClient | None,
    store: MappingStore,
    config: LinkerConfig = LinkerConfig(),
    force: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> LinkRun:
    """Link every entry, persist decisions, and report coverage.

    Entries that already have a store record are skipped unless `force`,
    so an interrupted run can resume where it stopped. Per-entry
    failures are collected, not fatal. Coverage is computed from the
    final store state restricted to the given entries.
    """
    decisions: list[LinkDecision] = []
    failures: list[LinkFailure] = []
    conflicts: list[UpsertOutcome] = []
    skipped = 0
    total = len(entries)
    for i, entry in enumerate(entries):
        if progress is not None:
            progress(i, total)
        existing = store.get(entry.id)
        if existing is not None and not force:
            skipped += 1
            continue
        try:
            decision = link_entry(entry, indexes, client, config)
        except LinkerError:
            raise
        except Exception as exc:
            failures.append(LinkFailure(entry_id=entry.id, error=f"{type(exc).__name__}: {exc}"))
            continue
        outcome = store.upsert_decision(decision_to_record(entry, decision))
        if outcome.conflict:
            conflicts.append(outcome)
        if outcome.changed:
            store.store_decision(entry.id, decision.to_payload())
        decisions.append(decision)
    if progress is not None:
        progress(total, total)
    return LinkRun(
        decisions=tuple(decisions),
        report=compute_coverage(store, entries),
        failures=tuple(failures),
        skipped=skipped,
        conflicts=tuple(conflicts),
    )
