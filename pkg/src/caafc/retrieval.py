"""Primary-source selection and chronological evidence retrieval.

Retrieval backends take a query string and return a narrative. Links and
their dates are pulled out of the narrative, and the resulting bundle is
cached on disk keyed by the query hash and the calendar day it was fetched.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence
from urllib.parse import urlparse

import httpx

from .errors import EmptyNarrative, InvalidInput, RetrievalUnavailable
from .gateway import Gateway, Transcript, read_transcript, sha16
from .prompts import load_template
from .segmenter import AtomicClaim

_URL = re.compile(r"https?://[^\s<>\"'`]+")
_SOURCE_MARKER = re.compile(r"SOURCE\s*:\s*(https?://[^\s<>\"'`]+)", re.IGNORECASE)
_URL_DATE = re.compile(r"(?<!\d)((?:19|20)\d{2})[-/](\d{1,2})[-/](\d{1,2})(?!\d)")
_ISO_DATE = re.compile(r"(?<!\d)((?:19|20)\d{2})-(\d{2})-(\d{2})(?!\d)")
_MONTHS = (
    "january february march april may june july august september october november december".split()
)
_MONTH_RE = "|".join(m.capitalize() for m in _MONTHS)
_LONG_DATE = re.compile(rf"\b({_MONTH_RE})\s+(\d{{1,2}}),?\s+((?:19|20)\d{{2}})\b")
_DAY_FIRST_DATE = re.compile(rf"\b(\d{{1,2}})\s+({_MONTH_RE})\s+((?:19|20)\d{{2}})\b")


def is_absolute_http_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass(frozen=True)
class PrimarySource:
    descriptor: str
    rationale: str = ""

    def __post_init__(self):
        if not self.descriptor.strip():
            raise InvalidInput("primary source descriptor must be non-empty")


@dataclass(frozen=True)
class EvidenceItem:
    excerpt: str
    source_url: str
    source_date: dt.date | None = None

    def __post_init__(self):
        if not is_absolute_http_url(self.source_url):
            raise InvalidInput(f"not an absolute http(s) URL: {self.source_url!r}")

    def to_dict(self) -> dict:
        return {
            "excerpt": self.excerpt,
            "source_url": self.source_url,
            "source_date": self.source_date.isoformat() if self.source_date else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvidenceItem":
        date = data.get("source_date")
        return cls(data["excerpt"], data["source_url"], dt.date.fromisoformat(date) if date else None)


@dataclass(frozen=True)
class EvidenceBundle:
    query: str
    narrative: str
    items: tuple[EvidenceItem, ...] = ()
    backend_id: str = ""
    retrieved_at: dt.datetime | None = None
    cache_key: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def urls(self) -> list[str]:
        return [item.source_url for item in self.items]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "narrative": self.narrative,
            "items": [item.to_dict() for item in self.items],
            "backend_id": self.backend_id,
            "retrieved_at": self.retrieved_at.isoformat() if self.retrieved_at else None,
            "cache_key": self.cache_key,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvidenceBundle":
        stamp = data.get("retrieved_at")
        return cls(
            query=data["query"],
            narrative=data["narrative"],
            items=tuple(EvidenceItem.from_dict(i) for i in data.get("items", [])),
            backend_id=data.get("backend_id", ""),
            retrieved_at=dt.datetime.fromisoformat(stamp) if stamp else None,
            cache_key=data.get("cache_key"),
        )


# -- primary sources and the query --------------------------------------------


def select_primary_sources(
    gateway: Gateway, claim_text: str, model_id: str, repair_budget: int | None = None
) -> list[PrimarySource]:
    """Ask the model for the authoritative sources able to settle ``claim_text``.

    The model's ranking is kept as returned; an empty list is a legal answer.
    """
    if not claim_text.strip():
        raise InvalidInput("claim text must be non-empty")
    value = gateway.ask(
        load_template("primary_sources"),
        {"claim": claim_text},
        model_id=model_id,
        schema_name="source_list",
        stage="sources",
        repair_budget=repair_budget,
    )
    items = value["sources"] if isinstance(value, dict) else value
    sources = []
    for item in items:
        if isinstance(item, str):
            sources.append(PrimarySource(item.strip()))
            continue
        descriptor = item.get("source") or item.get("name") or item.get("descriptor") or ""
        rationale = item.get("justification") or item.get("rationale") or item.get("reason") or ""
        if descriptor.strip():
            sources.append(PrimarySource(descriptor.strip(), str(rationale).strip()))
    return sources


def build_query(
    atomic_claims: Sequence[AtomicClaim | str],
    date: dt.date | str | None,
    sources: Sequence[PrimarySource | str] = (),
) -> str:
    """Fill the timestamped-information query.

    Claims become a bracketed list of double-quoted strings, the date is ISO
    formatted (``unknown`` when absent), and the source sentence is omitted
    when there are no sources.
    """
    if not atomic_claims:
        raise InvalidInput("build_query needs at least one atomic claim")
    texts = [c.text if isinstance(c, AtomicClaim) else str(c) for c in atomic_claims]
    claims = "[" + ", ".join(f'"{t}"' for t in texts) + "]"
    if date is None:
        date_token = "unknown"
    elif isinstance(date, dt.date):
        date_token = date.isoformat()
    else:
        date_token = str(date)
    query = (
        f"I need timestamped information about the following list of claims {claims} "
        f"on the following date {date_token}."
    )
    descriptors = [s.descriptor if isinstance(s, PrimarySource) else str(s) for s in sources]
    if descriptors:
        query += " Start by checking the following sources: " + ", ".join(descriptors)
    return query


# -- narrative parsing -----------------------------------------------------------


def _strip_url(url: str) -> str:
    return url.rstrip(".,;:!?)]}>'\"")


def _date_from(text: str, in_url: bool) -> dt.date | None:
    patterns = [_URL_DATE] if in_url else [_ISO_DATE]
    for pattern in patterns:
        for m in pattern.finditer(text):
            try:
                return dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
            except ValueError:
                continue
    if in_url:
        return None
    for m in _LONG_DATE.finditer(text):
        try:
            return dt.date(int(m.group(3)), _MONTHS.index(m.group(1).lower()) + 1, int(m.group(2)))
        except ValueError:
            continue
    for m in _DAY_FIRST_DATE.finditer(text):
        try:
            return dt.date(int(m.group(3)), _MONTHS.index(m.group(2).lower()) + 1, int(m.group(1)))
        except ValueError:
            continue
    return None


def _item(excerpt: str, url: str) -> EvidenceItem | None:
    if not is_absolute_http_url(url):
        return None
    date = _date_from(url, in_url=True) or _date_from(excerpt, in_url=False)
    return EvidenceItem(excerpt=excerpt.strip(), source_url=url, source_date=date)


def extract_items(narrative: str) -> list[EvidenceItem]:
    """Pull linked evidence items out of a narrative.

    ``SOURCE: <url>`` markers take precedence: each one closes an excerpt that
    starts after the previous marker. Without markers every bare URL becomes
    an item whose excerpt is the line it appears on. URLs are deduplicated by
    exact string.
    """
    items: list[EvidenceItem] = []
    seen: set[str] = set()
    markers = list(_SOURCE_MARKER.finditer(narrative))
    if markers:
        start = 0
        for m in markers:
            url = _strip_url(m.group(1))
            excerpt = narrative[start:m.start()].strip().strip('"“”').strip()
            start = m.end()
            if url in seen:
                continue
            item = _item(excerpt, url)
            if item is not None:
                seen.add(url)
                items.append(item)
        return items
    for line in narrative.splitlines():
        for m in _URL.finditer(line):
            url = _strip_url(m.group(0))
            if url in seen:
                continue
            excerpt = (line[:m.start()] + line[m.end():]).strip()
            item = _item(excerpt, url)
            if item is not None:
                seen.add(url)
                items.append(item)
    return items


def canonicalize(bundle: EvidenceBundle) -> EvidenceBundle:
    """Stable-sort dated items by date; undated items follow in their original order."""
    dated = sorted((i for i in bundle.items if i.source_date is not None), key=lambda i: i.source_date)
    undated = [i for i in bundle.items if i.source_date is None]
    return replace(bundle, items=tuple(dated + undated))


def bundle_from_text(text: str, query: str = "", backend_id: str = "passthrough") -> EvidenceBundle:
    """Wrap dataset-provided evidence as a bundle (retrieval disabled)."""
    if not text or not text.strip():
        raise EmptyNarrative("evidence text is empty")
    return canonicalize(EvidenceBundle(query=query, narrative=text, items=tuple(extract_items(text)), backend_id=backend_id))


# -- backends ----------------------------------------------------------------------


class RetrievalBackend(Protocol):
    def search(self, query: str) -> str: ...


class FixtureRetrievalBackend:
    """Narratives from a mapping or from ``<query hash>.txt`` files.

    ``rules`` is a list of ``{"contains": ..., "narrative": ...}`` entries
    tried in order when no exact match exists.
    """

    def __init__(
        self,
        narratives: Mapping[str, str] | None = None,
        directory: str | Path | None = None,
        rules: Sequence[Mapping] = (),
        default: str | None = None,
    ):
        self.narratives = dict(narratives or {})
        self.directory = Path(directory) if directory is not None else None
        self.rules = list(rules)
        if self.directory is not None and (self.directory / "rules.json").is_file():
            self.rules.extend(json.loads((self.directory / "rules.json").read_text("utf-8")))
        self.default = default
        self.calls = 0

    def search(self, query: str) -> str:
        self.calls += 1
        if query in self.narratives:
            return self.narratives[query]
        if self.directory is not None:
            path = self.directory / f"{sha16(query)}.txt"
            if path.is_file():
                return path.read_text("utf-8")
        for rule in self.rules:
            needles = rule.get("contains", [])
            if isinstance(needles, str):
                needles = [needles]
            if all(n in query for n in needles):
                return rule["narrative"]
        if self.default is not None:
            return self.default
        raise RetrievalUnavailable(f"no fixture narrative for query {sha16(query)}")


class HttpSearchBackend:
    """Generic JSON search endpoint: POST ``{"query": ...}``, read ``narrative`` or ``text``."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        auth_header: str = "Authorization",
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.auth_header = auth_header
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def search(self, query: str) -> str:
        headers = {}
        if self.api_key:
            value = f"Bearer {self.api_key}" if self.auth_header.lower() == "authorization" else self.api_key
            headers[self.auth_header] = value
        try:
            reply = self._client.post(self.endpoint, json={"query": query}, headers=headers)
            reply.raise_for_status()
            data = reply.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise RetrievalUnavailable(f"{self.endpoint}: {exc}") from exc
        text = data.get("narrative") or data.get("text") or ""
        links = data.get("links") or []
        if links:
            text = text + "\n" + "\n".join(f"SOURCE: {url}" for url in links if isinstance(url, str))
        return text


class ReplayRetrievalBackend:
    def __init__(self, narratives: Mapping[str, str]):
        self.narratives = dict(narratives)

    @classmethod
    def from_transcript(cls, path: str | Path) -> "ReplayRetrievalBackend":
        found: dict[str, str] = {}
        for record in read_transcript(path):
            if record.get("kind") == "retrieval":
                found.setdefault(record["query"], record["narrative"])
        return cls(found)

    def search(self, query: str) -> str:
        try:
            return self.narratives[query]
        except KeyError:
            raise RetrievalUnavailable("query not in replay transcript") from None


# -- retriever ----------------------------------------------------------------------


class EvidenceCache:
    """Directory of ``<16-hex query hash>-<ISO date>.json`` bundles."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def key(self, query: str, day: dt.date) -> str:
        return f"{sha16(query)}-{day.isoformat()}"

    def load(self, key: str) -> EvidenceBundle | None:
        path = self.directory / f"{key}.json"
        if not path.is_file():
            return None
        return EvidenceBundle.from_dict(json.loads(path.read_text("utf-8")))

    def store(self, key: str, bundle: EvidenceBundle) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(bundle.to_dict(), fh, ensure_ascii=False, indent=1)
        os.replace(tmp, self.directory / f"{key}.json")


class EvidenceRetriever:
    def __init__(
        self,
        backends: Mapping[str, RetrievalBackend] | None = None,
        cache_dir: str | Path | None = None,
        transcript: Transcript | None = None,
        today: Callable[[], dt.date] = dt.date.today,
        clock: Callable[[], dt.datetime] = lambda: dt.datetime.now(dt.timezone.utc),
    ):
        self.backends = dict(backends or {})
        self.cache = EvidenceCache(cache_dir) if cache_dir is not None else None
        self._memory: dict[str, EvidenceBundle] = {}
        self._lock = threading.Lock()
        self.transcript = transcript or Transcript(None)
        self.today = today
        self.clock = clock

    def register(self, backend_id: str, backend: RetrievalBackend) -> None:
        self.backends[backend_id] = backend

    def _cached(self, key: str) -> EvidenceBundle | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.cache is not None:
            return self.cache.load(key)
        return None

    def retrieve(self, query: str, backend_id: str) -> EvidenceBundle:
        if backend_id not in self.backends:
            raise RetrievalUnavailable(f"no retrieval backend {backend_id!r}")
        key = f"{sha16(query)}-{self.today().isoformat()}"
        bundle = self._cached(key)
        if bundle is None:
            try:
                narrative = self.backends[backend_id].search(query)
            except RetrievalUnavailable:
                raise
            except Exception as exc:
                raise RetrievalUnavailable(f"{backend_id}: {exc}") from exc
            if not narrative or not narrative.strip():
                raise EmptyNarrative(f"{backend_id} returned no narrative")
            bundle = EvidenceBundle(
                query=query,
                narrative=narrative,
                items=tuple(extract_items(narrative)),
                backend_id=backend_id,
                retrieved_at=self.clock(),
                cache_key=key,
            )
            if self.cache is not None:
                self.cache.store(key, bundle)
            cached = False
        else:
            cached = True
        with self._lock:
            self._memory[key] = bundle
        self.transcript.append(
            {"kind": "retrieval", "backend_id": backend_id, "query": query, "narrative": bundle.narrative, "cached": cached}
        )
        return bundle

