"""Stratified sampling of mappings and error/recoverability metrics.

The protocol: draw a seeded uniform sample per stratum (nature x
mapped/unmapped), have a human adjudicate each sampled mapping, then
compute per-stratum rates with exact rational arithmetic so quotable
figures like 4/25 render as 0.16, not 0.16000000000000003.
"""

from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .store import MappingStore, Status, UpsertOutcome

log = logging.getLogger(__name__)

DEFAULT_PER_STRATUM = 25


class Stratum(str, Enum):
    THEMATIC_MAPPED = "thematic_mapped"
    THEMATIC_UNMAPPED = "thematic_unmapped"
    BIOGRAPHICAL_MAPPED = "biographical_mapped"
    BIOGRAPHICAL_UNMAPPED = "biographical_unmapped"

    @property
    def nature(self) -> str:
        return self.value.rsplit("_", 1)[0]

    @property
    def mapped(self) -> bool:
        return self.value.endswith("_mapped")


# Population per stratum: automatically mapped vs. no automatic result.
_STRATUM_STATUS = {
    True: Status.UNREVIEWED_AUTO,
    False: Status.UNREVIEWED_NOT_FOUND,
}


class Verdict(str, Enum):
    AUTO_CORRECT = "auto_correct"
    AUTO_WRONG = "auto_wrong"
    HUMAN_FOUND = "human_found"
    HUMAN_NOT_FOUND = "human_not_found"


_MAPPED_VERDICTS = frozenset({Verdict.AUTO_CORRECT, Verdict.AUTO_WRONG})
_UNMAPPED_VERDICTS = frozenset({Verdict.HUMAN_FOUND, Verdict.HUMAN_NOT_FOUND})


class EvaluatorError(Exception):
    pass


class InconsistentVerdict(EvaluatorError):
    def __init__(self, entry_id: int, message: str):
        super().__init__(f"entry {entry_id}: {message}")
        self.entry_id = entry_id


@dataclass(frozen=True)
class AdjudicationRecord:
    entry_id: int
    stratum: Stratum
    verdict: Verdict
    found_qid: str | None = None
    adjudicator: str = ""
    note: str | None = None

    def validate(self) -> None:
        if self.stratum.mapped and self.verdict not in _MAPPED_VERDICTS:
            raise InconsistentVerdict(
                self.entry_id,
                f"verdict {self.verdict.value} not valid for {self.stratum.value}",
            )
        if not self.stratum.mapped and self.verdict not in _UNMAPPED_VERDICTS:
            raise InconsistentVerdict(
                self.entry_id,
                f"verdict {self.verdict.value} not valid for {self.stratum.value}",
            )
        if self.verdict is Verdict.HUMAN_FOUND and not self.found_qid:
            raise InconsistentVerdict(self.entry_id, "human_found requires found_qid")


@dataclass(frozen=True)
class SamplePlan:
    seed: int
    per_stratum: int
    entries: Mapping[Stratum, tuple[int, ...]]
    warnings: tuple[str, ...] = ()

    def total(self) -> int:
        return sum(len(ids) for ids in self.entries.values())


def stratified_sample(
    store: MappingStore, per_stratum: int = DEFAULT_PER_STRATUM, seed: int = 0
) -> SamplePlan:
    """Uniform without-replacement sample of entry ids per stratum.

    Deterministic in (store contents, per_stratum, seed): populations
    are sorted before drawing and each stratum uses its own
    seed-derived generator. Understaffed strata are clamped to their
    population size; empty ones produce a warning, not an error.
    """
    if per_stratum < 1:
        raise ValueError("per_stratum must be at least 1")
    plan: dict[Stratum, tuple[int, ...]] = {}
    warnings: list[str] = []
    for stratum in Stratum:
        status = _STRATUM_STATUS[stratum.mapped]
        population = sorted(
            r.entry_id
            for r in store.records_by_status(status)
            if r.nature == stratum.nature
        )
        if not population:
            warnings.append(f"stratum {stratum.value} is empty")
            log.warning(warnings[-1])
            plan[stratum] = ()
            continue
        k = min(per_stratum, len(population))
        rng = random.Random(f"{seed}:{stratum.value}")
        plan[stratum] = tuple(sorted(rng.sample(population, k)))
    return SamplePlan(
        seed=seed, per_stratum=per_stratum, entries=plan, warnings=tuple(warnings)
    )


# -- metrics -------------------------------------------------------------


@dataclass(frozen=True)
class StratumMetrics:
    stratum: Stratum
    sample_size: int
    auto_wrong: int = 0
    human_found: int = 0

    @property
    def rate(self) -> Fraction | None:
        """auto_error_rate for mapped strata, human_recoverable_rate otherwise."""
        if self.sample_size == 0:
            return None
        num = self.auto_wrong if self.stratum.mapped else self.human_found
        return Fraction(num, self.sample_size)


def render_fraction(frac: Fraction | None) -> str:
    """Exact decimal when the fraction terminates, '~'-marked float otherwise."""
    if frac is None:
        return "-"
    d = frac.denominator
    k2 = k5 = 0
    while d % 2 == 0:
        d //= 2
        k2 += 1
    while d % 5 == 0:
        d //= 5
        k5 += 1
    if d != 1:
        return f"~{float(frac):.4f}"
    k = max(k2, k5)
    scaled = frac.numerator * 10**k // frac.denominator
    if k == 0:
        return str(scaled)
    digits = str(scaled).rjust(k + 1, "0")
    return f"{digits[:-k]}.{digits[-k:]}"


@dataclass(frozen=True)
class EvalReport:
    by_stratum: Mapping[Stratum, StratumMetrics]

    def metrics(self, stratum: Stratum) -> StratumMetrics:
        return self.by_stratum.get(stratum) or StratumMetrics(stratum, 0)

    def render(self) -> str:
        lines = [
            f"{'stratum':<22} {'n':>4} {'auto_wrong':>11} {'human_found':>12} {'rate':>8}"
        ]
        for stratum in Stratum:
            m = self.metrics(stratum)
            lines.append(
                f"{stratum.value:<22} {m.sample_size:>4} {m.auto_wrong:>11}"
                f" {m.human_found:>12} {render_fraction(m.rate):>8}"
            )
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            s.value: {
                "sample_size": m.sample_size,
                "auto_wrong": m.auto_wrong,
                "human_found": m.human_found,
                "rate": render_fraction(m.rate),
            }
            for s, m in ((s, self.metrics(s)) for s in Stratum)
        }


def compute_metrics(adjudications: Iterable[AdjudicationRecord]) -> EvalReport:
    """Pooled per-stratum counts; rates as exact fractions.

    Concatenating two adjudication batches and computing once equals
    combining their counts, so incremental evaluation rounds pool
    cleanly.
    """
    sizes: dict[Stratum, int] = {s: 0 for s in Stratum}
    wrong: dict[Stratum, int] = {s: 0 for s in Stratum}
    found: dict[Stratum, int] = {s: 0 for s in Stratum}
    for adj in adjudications:
        adj.validate()
        sizes[adj.stratum] += 1
        if adj.verdict is Verdict.AUTO_WRONG:
            wrong[adj.stratum] += 1
        elif adj.verdict is Verdict.HUMAN_FOUND:
            found[adj.stratum] += 1
    return EvalReport(
        by_stratum={
            s: StratumMetrics(
                stratum=s,
                sample_size=sizes[s],
                auto_wrong=wrong[s],
                human_found=found[s],
            )
            for s in Stratum
            if sizes[s] > 0
        }
    )


# -- feeding verdicts back into the store --------------------------------

_VERDICT_TO_STORE = {
    Verdict.AUTO_CORRECT: "confirm",
    Verdict.AUTO_WRONG: "reject",
    Verdict.HUMAN_FOUND: "manual",
    Verdict.HUMAN_NOT_FOUND: "absent",
}


def apply_adjudications(
    store: MappingStore, adjudications: Iterable[AdjudicationRecord]
) -> list[UpsertOutcome]:
    """Turn each verdict into the corresponding human store write."""
    outcomes = []
    for adj in adjudications:
        adj.validate()
        outcomes.append(
            store.apply_verdict(
                adj.entry_id,
                _VERDICT_TO_STORE[adj.verdict],
                qid=adj.found_qid,
                reviewer=adj.adjudicator,
                note=adj.note,
            )
        )
    return outcomes


# -- TSV -----------------------------------------------------------------

PLAN_COLUMNS = ("entry_id", "stratum", "title", "nature", "qid", "status")
ADJUDICATION_COLUMNS = ("entry_id", "stratum", "verdict", "found_qid", "adjudicator", "note")


def write_plan_tsv(plan: SamplePlan, store: MappingStore, out: io.TextIOBase) -> int:
    writer = csv.writer(out, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(PLAN_COLUMNS)
    n = 0
    for stratum in Stratum:
        for entry_id in plan.entries.get(stratum, ()):
            record = store.get(entry_id)
            writer.writerow(
                (
                    str(entry_id),
                    stratum.value,
                    record.title if record else "",
                    record.nature if record else "",
                    (record.qid if record else None) or "",
                    record.status.value if record else "",
                )
            )
            n += 1
    return n


def read_adjudications_tsv(source: io.TextIOBase) -> list[AdjudicationRecord]:
    from .store import HeaderMismatch, MalformedRow

    reader = csv.reader(source, delimiter="\t", lineterminator="\n")
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise HeaderMismatch(ADJUDICATION_COLUMNS, ()) from None
    if header != ADJUDICATION_COLUMNS:
        raise HeaderMismatch(ADJUDICATION_COLUMNS, header)
    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ADJUDICATION_COLUMNS):
            raise MalformedRow(
                line_no, f"expected {len(ADJUDICATION_COLUMNS)} fields, got {len(row)}"
            )
        eid, stratum, verdict, qid, adjudicator, note = row
        try:
            records.append(
                AdjudicationRecord(
                    entry_id=int(eid),
                    stratum=Stratum(stratum),
                    verdict=Verdict(verdict),
                    found_qid=qid or None,
                    adjudicator=adjudicator,
                    note=note or None,
                )
            )
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from exc
    return records
