from __future__ import annotations

import socket
from datetime import datetime, timezone
from pathlib import Path

import pytest

import scenario40
from dhbb_linker.corpus import load_corpus
from dhbb_linker.dump_index import (
    PAGE_PROPS_SCHEMA,
    PAGE_SCHEMA,
    REDIRECT_SCHEMA,
    build_index,
)
from dhbb_linker.fixtures import CannedTransport, write_sql_dump
from dhbb_linker.linker import LinkerConfig
from dhbb_linker.wd_client import WikidataClient

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS40 = FIXTURES / "corpus40"


@pytest.fixture(scope="session", autouse=True)
def no_network():
    """Run the whole suite with networking unplugged.

    Outbound connects fail fast; local binds (port probing) stay
    allowed. Anything that needs remote data must go through fixtures.
    """

    def refuse(self, address, *args, **kwargs):
        raise RuntimeError(f"test suite runs offline; refusing connect to {address!r}")

    def refuse_create(address, *args, **kwargs):
        refuse(None, address)

    saved = (socket.socket.connect, socket.socket.connect_ex, socket.create_connection)
    socket.socket.connect = refuse
    socket.socket.connect_ex = refuse
    socket.create_connection = refuse_create
    try:
        yield
    finally:
        socket.socket.connect, socket.socket.connect_ex, socket.create_connection = saved

PINNED_NOW = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


def pinned_clock() -> datetime:
    return PINNED_NOW


@pytest.fixture(scope="session")
def corpus40():
    return load_corpus(CORPUS40)


def write_wiki_dumps(directory: Path, pages, redirects, props, gzip_props: bool = False):
    directory.mkdir(parents=True, exist_ok=True)
    write_sql_dump(pages, PAGE_SCHEMA, directory / "page.sql")
    write_sql_dump(redirects, REDIRECT_SCHEMA, directory / "redirect.sql")
    props_name = "page_props.sql.gz" if gzip_props else "page_props.sql"
    write_sql_dump(props, PAGE_PROPS_SCHEMA, directory / props_name, gzip=gzip_props)
    return directory / "page.sql", directory / "redirect.sql", directory / props_name


@pytest.fixture(scope="session")
def indexes40(tmp_path_factory):
    root = tmp_path_factory.mktemp("dumps40")
    pt = write_wiki_dumps(
        root / "pt", scenario40.PT_PAGES, scenario40.PT_REDIRECTS, scenario40.PT_PROPS,
        gzip_props=True,
    )
    en = write_wiki_dumps(
        root / "en", scenario40.EN_PAGES, scenario40.EN_REDIRECTS, scenario40.EN_PROPS
    )
    return {
        "pt": build_index(*pt, source_label="ptwiki-fixture"),
        "en": build_index(*en, source_label="enwiki-fixture"),
    }


@pytest.fixture()
def transport40():
    return CannedTransport(searches=scenario40.SEARCHES, entities=scenario40.ENTITIES)


@pytest.fixture()
def client40(transport40):
    return WikidataClient(transport40)


@pytest.fixture(scope="session")
def config40():
    return LinkerConfig()
