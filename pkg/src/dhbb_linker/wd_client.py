"""Wikidata API client with pluggable transports, caching, and rate limiting.

Three transports cover live use, offline test fixtures, and fixture
recording. All requests go through `Transport.get(params)`; the fixture
transport keys canned responses by a stable hash of the sorted params so
fixtures survive dict-ordering differences.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol

API_URL = "https://www.wikidata.org/w/api.php"
USER_AGENT = "dhbb-linker/0.1 (historical-dictionary coverage tooling)"
DEFAULT_POLITENESS_DELAY = 0.2
CACHE_MAX_AGE_DAYS = 30
SEARCH_LIMIT_MAX = 50
FETCH_BATCH_SIZE = 50

# Params that only shape the envelope, not the answer; excluded from keys.
_KEY_EXCLUDED = frozenset({"format", "formatversion", "maxlag"})


class ClientError(Exception):
    pass


class NetworkError(ClientError):
    """Transport-level failure; `retryable` hints whether a retry may help."""

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class ServiceError(ClientError):
    """The API answered with an error payload."""

    def __init__(self, code: str, info: str = ""):
        super().__init__(f"{code}: {info}" if info else code)
        self.code = code


class RateLimited(ServiceError):
    def __init__(self, info: str = ""):
        super().__init__("ratelimited", info)


class FixtureMissing(ClientError):
    """Offline transport has no canned response for the request."""

    def __init__(self, key: str, params: Mapping[str, str]):
        super().__init__(f"no fixture for request {key} {dict(params)!r}")
        self.key = key
        self.params = dict(params)


def request_key(params: Mapping[str, str]) -> str:
    """Stable key for one logical API request."""
    canon = json.dumps(
        sorted((k, str(v)) for k, v in params.items() if k not in _KEY_EXCLUDED),
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class Transport(Protocol):
    calls: int

    def get(self, params: Mapping[str, str]) -> dict: ...


class HttpTransport:
    """Live HTTP transport with a politeness delay between requests."""

    def __init__(
        self,
        url: str = API_URL,
        politeness_delay: float = DEFAULT_POLITENESS_DELAY,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        timeout: float = 30.0,
    ):
        import requests

        self._session = requests.Session()
        self._session.headers["User-Agent"] = USER_AGENT
        self._url = url
        self._delay = politeness_delay
        self._sleep = sleep
        self._clock = clock
        self._timeout = timeout
        self._last = None
        self.calls = 0

    def get(self, params: Mapping[str, str]) -> dict:
        import requests

        if self._last is not None:
            wait = self._delay - (self._clock() - self._last)
            if wait > 0:
                self._sleep(wait)
        full = {"format": "json", "formatversion": "2", **params}
        self.calls += 1
        self._last = self._clock()
        try:
            resp = self._session.get(self._url, params=full, timeout=self._timeout)
        except requests.Timeout as exc:
            raise NetworkError(f"timeout: {exc}", retryable=True) from exc
        except requests.ConnectionError as exc:
            raise NetworkError(f"connection failed: {exc}", retryable=True) from exc
        except requests.RequestException as exc:
            raise NetworkError(str(exc), retryable=False) from exc
        if resp.status_code == 429:
            raise RateLimited(f"http 429 from {self._url}")
        if resp.status_code >= 500:
            raise NetworkError(f"http {resp.status_code}", retryable=True)
        if resp.status_code != 200:
            raise NetworkError(f"http {resp.status_code}", retryable=False)
        try:
            return resp.json()
        except ValueError as exc:
            raise NetworkError(f"non-JSON response: {exc}", retryable=False) from exc


class DirectoryFixtureTransport:
    """Serves canned responses from `<key>.json` files; never touches the network.

    Each file holds {"params": {...}, "response": {...}}; only "response"
    is read back (params are kept for human inspection of fixtures).
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.calls = 0

    def get(self, params: Mapping[str, str]) -> dict:
        key = request_key(params)
        path = self.directory / f"{key}.json"
        if not path.exists():
            raise FixtureMissing(key, params)
        self.calls += 1
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["response"]


class RecordingTransport:
    """Wraps a live transport and writes every response as a fixture file."""

    def __init__(self, inner: Transport, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.calls = 0

    def get(self, params: Mapping[str, str]) -> dict:
        self.calls += 1
        response = self.inner.get(params)
        key = request_key(params)
        payload = {"params": {k: str(v) for k, v in sorted(params.items())}, "response": response}
        with open(self.directory / f"{key}.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=1, sort_keys=True)
            fh.write("\n")
        return response


class ResponseCache:
    """Sqlite-backed response cache with a staleness horizon."""

    def __init__(
        self,
        path: str | Path,
        max_age_days: float = CACHE_MAX_AGE_DAYS,
        clock: Callable[[], float] = time.time,
    ):
        self._con = sqlite3.connect(path, check_same_thread=False)
        self._lock = threading.RLock()
        self._max_age = max_age_days * 86400.0
        self._clock = clock
        with self._lock:
            self._con.execute(
                "CREATE TABLE IF NOT EXISTS responses ("
                " key TEXT PRIMARY KEY, fetched_at REAL NOT NULL, body TEXT NOT NULL)"
            )
            self._con.commit()
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> dict | None:
        with self._lock:
            row = self._con.execute(
                "SELECT fetched_at, body FROM responses WHERE key = ?", (key,)
            ).fetchone()
        if row is None or self._clock() - row[0] > self._max_age:
            self.misses += 1
            return None
        self.hits += 1
        return json.loads(row[1])

    def put(self, key: str, body: dict) -> None:
        with self._lock:
            self._con.execute(
                "INSERT OR REPLACE INTO responses VALUES (?, ?, ?)",
                (key, self._clock(), json.dumps(body, ensure_ascii=False)),
            )
            self._con.commit()

    def close(self) -> None:
        self._con.close()


class RateLimiter:
    """Token-style limiter: at most `max_per_second` starts per rolling second."""

    def __init__(
        self,
        max_per_second: float = 5.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_per_second <= 0:
            raise ValueError("max_per_second must be positive")
        self._interval = 1.0 / max_per_second
        self._clock = clock
        self._sleep = sleep
        self._next_free = None
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            if self._next_free is None or now >= self._next_free:
                self._next_free = now + self._interval
                return
            wait = self._next_free - now
            self._next_free += self._interval
        self._sleep(wait)


@dataclass(frozen=True)
class SearchHit:
    qid: str
    label: str
    description: str = ""
    match_text: str = ""  # the label or alias the search engine matched on


@dataclass(frozen=True)
class EntityRecord:
    """Slice of one Wikidata entity relevant to linking decisions.

    Claim fields are None when the claim is entirely absent and a
    (possibly empty) list when present; filters treat these differently.
    """

    qid: str
    labels: Mapping[str, str] = field(default_factory=dict)
    aliases: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    instance_of: tuple[str, ...] = ()
    country: tuple[str, ...] | None = None
    citizenship: tuple[str, ...] | None = None
    sitelinks: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EntityFetch:
    entities: Mapping[str, EntityRecord]
    missing: frozenset[str]


P_INSTANCE_OF = "P31"
P_COUNTRY = "P17"
P_CITIZENSHIP = "P27"


def _claim_qids(entity: Mapping, prop: str) -> tuple[str, ...] | None:
    claims = entity.get("claims", {})
    if prop not in claims:
        return None
    out = []
    for claim in claims[prop]:
        snak = claim.get("mainsnak", {})
        value = snak.get("datavalue", {}).get("value")
        if isinstance(value, Mapping) and "id" in value:
            out.append(value["id"])
    return tuple(out)


def parse_entity(entity: Mapping) -> EntityRecord:
    """Build an EntityRecord from one wbgetentities entity payload."""
    labels = {
        lang: v["value"] if isinstance(v, Mapping) else str(v)
        for lang, v in entity.get("labels", {}).items()
    }
    aliases = {
        lang: tuple(a["value"] if isinstance(a, Mapping) else str(a) for a in items)
        for lang, items in entity.get("aliases", {}).items()
    }
    sitelinks = {
        wiki: v["title"] if isinstance(v, Mapping) else str(v)
        for wiki, v in entity.get("sitelinks", {}).items()
    }
    return EntityRecord(
        qid=entity["id"],
        labels=labels,
        aliases=aliases,
        instance_of=_claim_qids(entity, P_INSTANCE_OF) or (),
        country=_claim_qids(entity, P_COUNTRY),
        citizenship=_claim_qids(entity, P_CITIZENSHIP),
        sitelinks=sitelinks,
    )


class WikidataClient:
    """High-level search and entity fetch over any Transport."""

    def __init__(
        self,
        transport: Transport,
        cache: ResponseCache | None = None,
        limiter: RateLimiter | None = None,
    ):
        self._transport = transport
        self._cache = cache
        self._limiter = limiter

    def _request(self, params: Mapping[str, str]) -> dict:
        key = request_key(params)
        if self._cache is not None:
            cached = self._cache.get(key)
            if cached is not None:
                return cached
        if self._limiter is not None:
            self._limiter.acquire()
        body = self._transport.get(params)
        if "error" in body:
            code = body["error"].get("code", "unknown")
            info = body["error"].get("info", "")
            if code == "ratelimited":
                raise RateLimited(info)
            raise ServiceError(code, info)
        if self._cache is not None:
            self._cache.put(key, body)
        return body

    def search_entities(
        self,
        query: str,
        language: str = "pt",
        limit: int = 20,
        fallback_language: str | None = "en",
    ) -> list[SearchHit]:
        """wbsearchentities lookup; falls back to a second language on no hits."""
        if not query.strip():
            raise ValueError("search query must be non-empty")
        if not 1 <= limit <= SEARCH_LIMIT_MAX:
            raise ValueError(f"limit must be in 1..{SEARCH_LIMIT_MAX}")
        hits = self._search_once(query, language, limit)
        if not hits and fallback_language and fallback_language != language:
            hits = self._search_once(query, fallback_language, limit)
        return hits

    def _search_once(self, query: str, language: str, limit: int) -> list[SearchHit]:
        body = self._request(
            {
                "action": "wbsearchentities",
                "search": query,
                "language": language,
                "uselang": language,
                "type": "item",
                "limit": str(limit),
            }
        )
        hits = []
        for raw in body.get("search", []):
            match = raw.get("match", {})
            hits.append(
                SearchHit(
                    qid=raw["id"],
                    label=raw.get("label", ""),
                    description=raw.get("description", ""),
                    match_text=match.get("text", raw.get("label", "")),
                )
            )
        return hits

    def fetch_entities(self, qids: Iterable[str]) -> EntityFetch:
        """wbgetentities for any number of QIDs, batched under the API cap."""
        wanted = list(dict.fromkeys(qids))
        entities: dict[str, EntityRecord] = {}
        missing: set[str] = set()
        for start in range(0, len(wanted), FETCH_BATCH_SIZE):
            batch = wanted[start : start + FETCH_BATCH_SIZE]
            body = self._request(
                {
                    "action": "wbgetentities",
                    "ids": "|".join(batch),
                    "props": "labels|aliases|claims|sitelinks",
                }
            )
            for qid, raw in body.get("entities", {}).items():
                if raw.get("missing") is not None or "id" not in raw:
                    missing.add(qid)
                else:
                    entities[raw["id"]] = parse_entity(raw)
        for qid in wanted:
            if qid not in entities:
                missing.add(qid)
        return EntityFetch(entities=entities, missing=frozenset(missing))

    def resolve_label_qid(self, label: str, language: str = "en") -> str | None:
        """First exact-label search hit, used to bootstrap config QIDs."""
        for hit in self.search_entities(label, language=language, limit=5):
            if hit.label.casefold() == label.casefold():
                return hit.qid
        return None
