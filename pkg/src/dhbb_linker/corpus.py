"""Ingestion of DHBB entry files.

An entry file is named `<id>.text` and starts with a `---`-delimited
header of `key: value` lines (the layout of the public DHBB repository),
followed by the article body. `title` and `natureza` are required;
unknown header keys are preserved so files round-trip.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .normalize import fold_diacritics


class Nature(str, enum.Enum):
    BIOGRAPHICAL = "biographical"
    THEMATIC = "thematic"


class CorpusError(Exception):
    """Base class for corpus parsing and loading failures."""


class MissingHeader(CorpusError):
    pass


class MissingRequiredKey(CorpusError):
    def __init__(self, name: str):
        super().__init__(f"missing required header key: {name}")
        self.name = name


class UnknownNature(CorpusError):
    def __init__(self, value: str):
        super().__init__(f"unrecognized natureza value: {value!r}")
        self.value = value


class NonNumericFilename(CorpusError):
    pass


class DirectoryNotFound(CorpusError):
    pass


class EmptyCorpus(CorpusError):
    pass


@dataclass(frozen=True)
class Entry:
    id: int
    title: str
    nature: Nature
    body: str
    source_path: str
    extra: tuple[tuple[str, str], ...] = ()  # unknown header keys, file order


@dataclass(frozen=True)
class CorpusStats:
    total: int
    biographical: int
    thematic: int


@dataclass(frozen=True)
class ParseFailure:
    source_path: str
    error: str


@dataclass(frozen=True)
class Corpus:
    entries: tuple[Entry, ...]
    stats: CorpusStats
    failures: tuple[ParseFailure, ...]


_HEADER_RE = re.compile(r"^---[ \t]*\r?\n(.*?)(?:\r?\n)---[ \t]*(?:\r?\n)?", re.S)
_ENTRY_FILE_RE = re.compile(r"^\d+\.text$")


def _parse_nature(value: str) -> Nature:
    folded = fold_diacritics(value.strip())
    if folded.startswith("biografico"):
        return Nature.BIOGRAPHICAL
    if folded.startswith("tematico"):
        return Nature.THEMATIC
    raise UnknownNature(value)


def parse_entry(raw: str, source_path: str) -> Entry:
    """Parse one entry file into a typed record.

    The id comes from the numeric filename stem, not the header, because
    the DHBB addresses entries by filename (e.g. text/5705.text).
    """
    stem = Path(source_path).stem
    if not stem.isdigit():
        raise NonNumericFilename(f"filename stem is not numeric: {source_path!r}")

    m = _HEADER_RE.match(raw.lstrip("﻿"))
    if not m:
        raise MissingHeader(f"no '---'-delimited header block in {source_path!r}")

    header: dict[str, str] = {}
    for line in m.group(1).splitlines():
        if not line.strip() or ":" not in line:
            continue  # tolerate stray header lines in human-edited files
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()

    title = header.pop("title", "").strip()
    if not title:
        raise MissingRequiredKey("title")
    natureza = header.pop("natureza", "")
    if not natureza:
        raise MissingRequiredKey("natureza")

    return Entry(
        id=int(stem),
        title=title,
        nature=_parse_nature(natureza),
        body=raw[m.end():] if m.end() <= len(raw) else "",
        source_path=source_path,
        extra=tuple(header.items()),
    )


def render_entry(entry: Entry) -> str:
    """Write an Entry back to the file format (inverse of parse_entry)."""
    natureza = "biográfico" if entry.nature is Nature.BIOGRAPHICAL else "temático"
    lines = [f"title: {entry.title}", f"natureza: {natureza}"]
    lines.extend(f"{k}: {v}" for k, v in entry.extra)
    return "---\n" + "\n".join(lines) + "\n---\n" + entry.body


def load_corpus(directory: str | Path) -> Corpus:
    """Load every `<digits>.text` file under a directory.

    Entries come back sorted by id. Files that fail to parse are recorded
    as failures instead of aborting the load; a corpus of thousands of
    human-edited files will contain stragglers.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DirectoryNotFound(str(directory))

    entries: list[Entry] = []
    failures: list[ParseFailure] = []
    for path in sorted(directory.iterdir()):
        if not _ENTRY_FILE_RE.match(path.name):
            continue
        try:
            raw = path.read_text(encoding="utf-8")
            entries.append(parse_entry(raw, str(path)))
        except (CorpusError, OSError, UnicodeDecodeError) as exc:
            failures.append(ParseFailure(str(path), f"{type(exc).__name__}: {exc}"))

    if not entries:
        raise EmptyCorpus(f"no parseable entry files in {directory}")

    entries.sort(key=lambda e: e.id)
    return Corpus(entries=tuple(entries), stats=compute_stats(entries), failures=tuple(failures))


def compute_stats(entries: list[Entry] | tuple[Entry, ...]) -> CorpusStats:
    bio = sum(1 for e in entries if e.nature is Nature.BIOGRAPHICAL)
    return CorpusStats(total=len(entries), biographical=bio, thematic=len(entries) - bio)
