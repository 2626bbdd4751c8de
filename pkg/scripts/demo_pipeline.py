#!/usr/bin/env python3
"""Run the whole linking pipeline offline on the bundled fixture corpus.

Synthetic wiki dumps are written and indexed on the fly and Wikidata
responses come from the canned scenario the tests use, so no network is
needed. Artifacts (indexes, mapping store, TSV exports, gap report,
sample plan) land in --workdir.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))  # canned scenario lives with the tests

import scenario40  # noqa: E402

from dhbb_linker.corpus import load_corpus  # noqa: E402
from dhbb_linker.dump_index import (  # noqa: E402
    PAGE_PROPS_SCHEMA,
    PAGE_SCHEMA,
    REDIRECT_SCHEMA,
    build_index,
)
from dhbb_linker.evaluator import stratified_sample, write_plan_tsv  # noqa: E402
from dhbb_linker.fixtures import CannedTransport, write_sql_dump  # noqa: E402
from dhbb_linker.linker import link_corpus  # noqa: E402
from dhbb_linker.store import (  # noqa: E402
    MappingStore,
    export_tsv_path,
    gap_report,
    gap_report_tsv,
)
from dhbb_linker.wd_client import WikidataClient  # noqa: E402


def build_fixture_index(workdir: Path, wiki: str, pages, redirects, props):
    dumps = workdir / "dumps" / wiki
    dumps.mkdir(parents=True, exist_ok=True)
    write_sql_dump(pages, PAGE_SCHEMA, dumps / "page.sql")
    write_sql_dump(redirects, REDIRECT_SCHEMA, dumps / "redirect.sql")
    write_sql_dump(props, PAGE_PROPS_SCHEMA, dumps / "page_props.sql")
    index = build_index(
        dumps / "page.sql",
        dumps / "redirect.sql",
        dumps / "page_props.sql",
        source_label=f"{wiki}wiki-fixture",
    )
    index.save(workdir / f"{wiki}.idx")
    return index


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=Path("demo-out"))
    parser.add_argument("--per-stratum", type=int, default=5,
                        help="sample size per review stratum")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    work = args.workdir
    work.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(ROOT / "tests" / "fixtures" / "corpus40")
    print(f"corpus: {len(corpus.entries)} entries "
          f"({corpus.stats.biographical} biographical, {corpus.stats.thematic} thematic)")

    indexes = {
        "pt": build_fixture_index(work, "pt", scenario40.PT_PAGES,
                                  scenario40.PT_REDIRECTS, scenario40.PT_PROPS),
        "en": build_fixture_index(work, "en", scenario40.EN_PAGES,
                                  scenario40.EN_REDIRECTS, scenario40.EN_PROPS),
    }
    for wiki, index in indexes.items():
        print(f"{wiki} index: {index.stats}")

    client = WikidataClient(
        CannedTransport(searches=scenario40.SEARCHES, entities=scenario40.ENTITIES)
    )
    store = MappingStore(work / "mappings.db")
    run = link_corpus(corpus.entries, indexes, client, store)
    print()
    print(run.report.render())
    for failure in run.failures:
        print(f"warning: entry {failure.entry_id} failed: {failure.error}",
              file=sys.stderr)

    export_tsv_path(store.all_records(), work / "mappings.tsv")
    with open(work / "gaps.tsv", "w", encoding="utf-8", newline="") as fh:
        n_gaps = gap_report_tsv(gap_report(store, corpus.entries), fh)
    plan = stratified_sample(store, per_stratum=args.per_stratum, seed=args.seed)
    with open(work / "plan.tsv", "w", encoding="utf-8", newline="") as fh:
        n_plan = write_plan_tsv(plan, store, fh)

    print()
    print(f"wrote {work}/mappings.tsv, {work}/gaps.tsv ({n_gaps} gap entries), "
          f"{work}/plan.tsv ({n_plan} sampled)")
    print(f"review UI: dhbb-linker serve --store {work}/mappings.db "
          f"--corpus {ROOT / 'tests' / 'fixtures' / 'corpus40'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
