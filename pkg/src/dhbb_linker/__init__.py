"""Link DHBB entry titles to Wikidata items and drive review of the gaps."""

from .corpus import Corpus, Entry, Nature, load_corpus
from .dump_index import SitelinkIndex, build_index, parse_sql_dump
from .linker import (
    Candidate,
    CoverageReport,
    DecisionStatus,
    LinkDecision,
    LinkerConfig,
    link_corpus,
    link_entry,
)
from .normalize import TitleForms, bounded_edit_distance, title_forms
from .store import MappingRecord, MappingStore, Provenance, Status
from .wd_client import WikidataClient

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "Corpus",
    "CoverageReport",
    "DecisionStatus",
    "Entry",
    "LinkDecision",
    "LinkerConfig",
    "MappingRecord",
    "MappingStore",
    "Nature",
    "Provenance",
    "SitelinkIndex",
    "Status",
    "TitleForms",
    "WikidataClient",
    "bounded_edit_distance",
    "build_index",
    "link_corpus",
    "link_entry",
    "load_corpus",
    "parse_sql_dump",
    "title_forms",
    "__version__",
]
