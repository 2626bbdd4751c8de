"""Command-line entry point for every pipeline stage.

Subcommands: build-index, link, sample, adjudicate-import, evaluate,
export, gaps, serve, bootstrap-config. Progress goes to stderr, machine
output to stdout or --out. Every flag can also be set through an
environment variable named DHBB_<FLAG> (dashes as underscores), e.g.
DHBB_STORE for --store. Exit codes: 0 success, 1 operational failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

from . import __version__
from .corpus import CorpusError, load_corpus
from .dump_index import DumpParseError, SitelinkIndex, build_index
from .evaluator import (
    EvaluatorError,
    apply_adjudications,
    compute_metrics,
    read_adjudications_tsv,
    stratified_sample,
    write_plan_tsv,
)
from .linker import LinkerConfig, LinkerError, dump_config, link_corpus, load_config
from .store import (
    MappingStore,
    StoreError,
    export_tsv,
    gap_report,
    gap_report_tsv,
)
from .wd_client import (
    ClientError,
    DirectoryFixtureTransport,
    HttpTransport,
    RateLimiter,
    ResponseCache,
    WikidataClient,
)

ENV_PREFIX = "DHBB_"


def _env(flag: str) -> str | None:
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))


def _add(parser: argparse.ArgumentParser, flag: str, **kwargs) -> None:
    """add_argument with the DHBB_* environment variable as the default."""
    env_value = _env(flag.lstrip("-"))
    if env_value is not None:
        if kwargs.get("action") in ("store_true", "store_false"):
            kwargs["default"] = env_value.lower() in ("1", "true", "yes")
        elif "type" in kwargs:
            kwargs["default"] = kwargs["type"](env_value)
        else:
            kwargs["default"] = env_value
        kwargs.pop("required", None)
    parser.add_argument(flag, **kwargs)


def _index_pair(value: str) -> tuple[str, str]:
    if "=" not in value:
        raise argparse.ArgumentTypeError(
            f"expected WIKI=PATH (e.g. pt=ptwiki.idx), got {value!r}"
        )
    wiki, _, path = value.partition("=")
    return wiki.strip(), path.strip()


def _open_out(args) -> object:
    if getattr(args, "out", None):
        return open(args.out, "w", encoding="utf-8", newline="")
    return sys.stdout


def _build_client(args) -> WikidataClient | None:
    if getattr(args, "no_search", False):
        return None
    if getattr(args, "fixtures", None):
        transport = DirectoryFixtureTransport(args.fixtures)
        return WikidataClient(transport)
    cache = ResponseCache(args.cache) if getattr(args, "cache", None) else None
    limiter = RateLimiter(max_per_second=args.rate) if getattr(args, "rate", None) else None
    return WikidataClient(HttpTransport(), cache=cache, limiter=limiter)


def _load_indexes(pairs) -> dict[str, SitelinkIndex]:
    return {wiki: SitelinkIndex.load(path) for wiki, path in pairs or []}


# -- subcommand handlers -------------------------------------------------


def cmd_build_index(args) -> int:
    index = build_index(
        args.page,
        args.redirect,
        args.page_props,
        source_label=args.source_label or f"{args.wiki}wiki",
    )
    for warning in index.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    index.save(args.out)
    print(
        f"indexed {index.stats.get('qids', 0)} titles and "
        f"{index.stats.get('redirects', 0)} redirects -> {args.out}",
        file=sys.stderr,
    )
    print(json.dumps({"out": str(args.out), **index.stats}))
    return 0


def cmd_link(args) -> int:
    corpus = load_corpus(args.corpus)
    entries = corpus.entries[: args.limit] if args.limit else corpus.entries
    for failure in corpus.failures:
        print(f"warning: skipped {failure.source_path}: {failure.error}", file=sys.stderr)
    indexes = _load_indexes(args.index)
    client = _build_client(args)
    config = load_config(args.config) if args.config else LinkerConfig()
    store = MappingStore(args.store)

    def progress(done: int, total: int) -> None:
        if done % 200 == 0 or done == total:
            print(f"linked {done}/{total}", file=sys.stderr)

    run = link_corpus(
        entries, indexes, client, store, config, force=args.force, progress=progress
    )
    for failure in run.failures:
        print(f"warning: entry {failure.entry_id} failed: {failure.error}", file=sys.stderr)
    if run.skipped:
        print(f"skipped {run.skipped} already-decided entries", file=sys.stderr)
    out = _open_out(args)
    if args.json:
        json.dump(run.report.as_dict(), out, indent=2, sort_keys=True)
        out.write("\n")
    else:
        out.write(run.report.render() + "\n")
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_sample(args) -> int:
    store = MappingStore(args.store)
    plan = stratified_sample(store, per_stratum=args.per_stratum, seed=args.seed)
    for warning in plan.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    out = _open_out(args)
    n = write_plan_tsv(plan, store, out)
    if out is not sys.stdout:
        out.close()
    print(f"sampled {n} entries (seed {args.seed})", file=sys.stderr)
    return 0


def cmd_adjudicate_import(args) -> int:
    store = MappingStore(args.store)
    with open(args.adjudications, encoding="utf-8", newline="") as fh:
        records = read_adjudications_tsv(fh)
    outcomes = apply_adjudications(store, records)
    conflicts = [o for o in outcomes if o.conflict]
    changed = sum(1 for o in outcomes if o.changed)
    print(f"applied {changed}/{len(outcomes)} verdicts", file=sys.stderr)
    for o in conflicts:
        print(
            f"conflict: entry {o.record.entry_id} already decided by "
            f"{o.record.reviewer or 'a reviewer'} ({o.record.status.value})",
            file=sys.stderr,
        )
    return 0


def cmd_evaluate(args) -> int:
    with open(args.adjudications, encoding="utf-8", newline="") as fh:
        records = read_adjudications_tsv(fh)
    report = compute_metrics(records)
    out = _open_out(args)
    if args.json:
        json.dump(report.as_dict(), out, indent=2, sort_keys=True)
        out.write("\n")
    else:
        out.write(report.render() + "\n")
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_export(args) -> int:
    store = MappingStore(args.store)
    out = _open_out(args)
    n = export_tsv(store.all_records(), out)
    if out is not sys.stdout:
        out.close()
    print(f"exported {n} records", file=sys.stderr)
    return 0


def cmd_gaps(args) -> int:
    store = MappingStore(args.store)
    entries = load_corpus(args.corpus).entries if args.corpus else []
    items = gap_report(store, entries)
    out = _open_out(args)
    n = gap_report_tsv(items, out)
    if out is not sys.stdout:
        out.close()
    print(f"{n} entries look absent from Wikidata", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        try:
            probe.bind((args.host, args.port))
        except OSError as exc:
            print(f"error: port {args.port} unavailable: {exc}", file=sys.stderr)
            return 1

    store = MappingStore(args.store)
    entries = load_corpus(args.corpus).entries if args.corpus else []
    config = load_config(args.config) if args.config else LinkerConfig()
    app = create_app(
        store, entries, config=config, static_dir=args.static, token=args.token
    )
    print(f"review service on http://{args.host}:{args.port}/", file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_bootstrap_config(args) -> int:
    defaults = LinkerConfig()
    brazil = defaults.brazil_qid
    disamb = defaults.disambiguation_class_qids
    client = _build_client(args)
    if client is not None:
        try:
            brazil = client.resolve_label_qid("Brazil", language="en") or brazil
            found = client.resolve_label_qid(
                "Wikimedia disambiguation page", language="en"
            )
            if found:
                disamb = (found,)
        except ClientError as exc:
            print(f"warning: lookup failed, keeping defaults: {exc}", file=sys.stderr)
    config = LinkerConfig(brazil_qid=brazil, disambiguation_class_qids=disamb)
    text = dump_config(config)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhbb-linker",
        description="Link DHBB entry titles to Wikidata items and review the gaps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="build a title->QID index from SQL dumps")
    _add(p, "--page", required=True, help="page table dump (.sql or .sql.gz)")
    _add(p, "--redirect", required=True, help="redirect table dump")
    _add(p, "--page-props", required=True, help="page_props table dump")
    _add(p, "--wiki", default="pt", help="wiki code, used in the default label")
    _add(p, "--source-label", default=None, help="label stored in the index file")
    _add(p, "--out", required=True, help="output index file")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("link", help="link corpus entries and persist decisions")
    _add(p, "--corpus", required=True, help="directory of <id>.text entry files")
    p.add_argument(
        "--index",
        action="append",
        type=_index_pair,
        metavar="WIKI=PATH",
        default=None,
        help="sitelink index file per wiki (repeatable)",
    )
    _add(p, "--store", required=True, help="mapping store file")
    _add(p, "--config", default=None, help="linker config file")
    _add(p, "--fixtures", default=None, help="canned-response directory (offline mode)")
    _add(p, "--cache", default=None, help="response cache file for live requests")
    _add(p, "--rate", type=float, default=None, help="max API requests per second")
    _add(p, "--no-search", action="store_true", help="use only local indexes")
    _add(p, "--force", action="store_true", help="relink entries already decided")
    _add(p, "--limit", type=int, default=None, help="only the first N entries")
    _add(p, "--json", action="store_true", help="emit the report as JSON")
    _add(p, "--out", default=None, help="write the report here instead of stdout")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("sample", help="draw a stratified review sample")
    _add(p, "--store", required=True)
    _add(p, "--per-stratum", type=int, default=25)
    _add(p, "--seed", type=int, default=0)
    _add(p, "--out", default=None, help="plan TSV path (default stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("adjudicate-import", help="apply human verdicts from a TSV")
    _add(p, "--store", required=True)
    _add(p, "--adjudications", required=True, help="adjudication TSV file")
    p.set_defaults(func=cmd_adjudicate_import)

    p = sub.add_parser("evaluate", help="compute error and recoverability rates")
    _add(p, "--adjudications", required=True, help="adjudication TSV file")
    _add(p, "--json", action="store_true")
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="export the mapping store as TSV")
    _add(p, "--store", required=True)
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("gaps", help="report entries that look absent from Wikidata")
    _add(p, "--store", required=True)
    _add(p, "--corpus", default=None, help="corpus directory for descriptions")
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("serve", help="run the HTTP review service")
    _add(p, "--store", required=True)
    _add(p, "--corpus", default=None)
    _add(p, "--config", default=None)
    _add(p, "--host", default="127.0.0.1")
    _add(p, "--port", type=int, default=8753)
    _add(p, "--static", default=None, help="directory with the built review UI")
    _add(p, "--token", default=None, help="require this X-Auth-Token header")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser(
        "bootstrap-config", help="write a config file with QIDs resolved by label"
    )
    _add(p, "--fixtures", default=None)
    _add(p, "--no-search", action="store_true", help="keep built-in defaults")
    _add(p, "--out", default=None)
    p.set_defaults(func=cmd_bootstrap_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        CorpusError,
        DumpParseError,
        StoreError,
        ClientError,
        LinkerError,
        EvaluatorError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
