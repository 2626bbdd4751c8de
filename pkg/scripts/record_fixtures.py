#!/usr/bin/env python3
"""Record live Wikidata API responses for offline replay.

Each response is written to --out as <sha256-of-request-key>.json, the
layout DirectoryFixtureTransport reads. Point tests or the CLI at the
directory afterwards and they run without touching the network.

Example:
    python3 scripts/record_fixtures.py --out fixtures/wd \\
        --search "Getulio Vargas" --entity Q43063 --entity Q155
"""

from __future__ import annotations

import argparse
from pathlib import Path

from dhbb_linker.wd_client import HttpTransport, RecordingTransport, WikidataClient


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, required=True,
                        help="directory to write recorded responses into")
    parser.add_argument("--search", action="append", default=[], metavar="QUERY",
                        help="record a wbsearchentities call (repeatable)")
    parser.add_argument("--entity", action="append", default=[], metavar="QID",
                        help="record a wbgetentities fetch (repeatable, batched)")
    parser.add_argument("--language", default="pt")
    parser.add_argument("--limit", type=int, default=20,
                        help="max search hits per query")
    args = parser.parse_args(argv)

    if not args.search and not args.entity:
        parser.error("nothing to record; pass --search and/or --entity")

    args.out.mkdir(parents=True, exist_ok=True)
    client = WikidataClient(RecordingTransport(HttpTransport(), args.out))

    for query in args.search:
        hits = client.search_entities(query, language=args.language, limit=args.limit)
        print(f"search {query!r}: {len(hits)} hits")
    if args.entity:
        fetch = client.fetch_entities(args.entity)
        print(f"entities: {len(fetch.entities)} fetched, {len(fetch.missing)} missing")

    print(f"recorded under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
