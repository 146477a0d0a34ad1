"""Uniform access to text-generation backends.

Every model call made by the pipeline goes through :class:`Gateway`, which
enforces zero temperature, retries transport failures with exponential
backoff, caps the number of calls per run, limits in-flight requests per
backend, and appends every exchange to a JSONL transcript.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import json
import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Protocol

import httpx

from .errors import (
    BackendUnavailable,
    BudgetExceeded,
    InvalidInput,
    NoJsonFound,
    SchemaViolation,
    StructuredOutputFailure,
    TransportError,
)
from .prompts import PromptTemplate, render
from .structured import extract_json

logger = logging.getLogger(__name__)

REPAIR_SUFFIX = "Return only the JSON object, nothing else."
DEFAULT_CALL_BUDGET = 64


def sha16(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def fixture_key(template_name: str, bindings: Mapping[str, str]) -> str:
    """Stable lookup key for a rendered template: name plus a hash of its bindings."""
    payload = json.dumps(dict(bindings), sort_keys=True, ensure_ascii=False)
    return f"{template_name}-{sha16(payload)}"


def prompt_hash(system_text: str | None, user_text: str) -> str:
    return sha16(f"{system_text or ''}\x00{user_text}")


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    user_text: str
    system_text: str | None = None
    temperature: float = 0.0
    max_output: int = 1024
    tags: tuple[str, ...] = ()
    template: str | None = None
    fixture_key: str | None = None

    def __post_init__(self):
        if self.temperature != 0.0:
            raise InvalidInput("pipeline requests must use temperature 0.0")
        if not self.user_text:
            raise InvalidInput("user_text must be non-empty")
        if self.max_output <= 0:
            raise InvalidInput("max_output must be positive")
        object.__setattr__(self, "tags", tuple(self.tags))

    @property
    def stage(self) -> str:
        return self.tags[0] if self.tags else "untagged"

    @property
    def prompt_hash(self) -> str:
        return prompt_hash(self.system_text, self.user_text)


@dataclass(frozen=True)
class GenerationResponse:
    raw_text: str
    model_id: str
    latency: float
    attempt: int


class Backend(Protocol):
    max_in_flight: int

    def generate(self, request: GenerationRequest) -> str: ...


class CallableBackend:
    """Adapts a plain function ``request -> text`` to the backend protocol."""

    def __init__(self, fn: Callable[[GenerationRequest], str], max_in_flight: int = 4):
        self.fn = fn
        self.max_in_flight = max_in_flight

    def generate(self, request: GenerationRequest) -> str:
        return self.fn(request)


class FixtureBackend:
    """Deterministic backend answering from files in a directory.

    Lookup order for a request:

    1. ``<fixture_key>.txt`` (keys come from :func:`fixture_key`; repair
       attempts append ``.repairN``),
    2. ``<prompt hash>.txt`` keyed on the full rendered prompt,
    3. the first matching entry of ``rules.json``: a list of objects with a
       ``response`` and optional ``template``, ``model`` and ``contains``
       (a string or list of strings that must all occur in the prompt).
    """

    max_in_flight = 16

    def __init__(self, directory: str | Path | None = None, rules: list[dict] | None = None):
        self.directory = Path(directory) if directory is not None else None
        self.rules = list(rules or [])
        if self.directory is not None and (self.directory / "rules.json").is_file():
            self.rules.extend(json.loads((self.directory / "rules.json").read_text("utf-8")))

    def _file(self, stem: str) -> str | None:
        if self.directory is None:
            return None
        path = self.directory / f"{stem}.txt"
        if path.is_file():
            return path.read_text("utf-8")
        return None

    def add(self, stem: str, response: str) -> Path:
        if self.directory is None:
            raise ValueError("fixture backend has no directory")
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{stem}.txt"
        path.write_text(response, "utf-8")
        return path

    def generate(self, request: GenerationRequest) -> str:
        if request.fixture_key:
            found = self._file(request.fixture_key)
            if found is not None:
                return found
        found = self._file(request.prompt_hash)
        if found is not None:
            return found
        prompt = f"{request.system_text or ''}\n{request.user_text}"
        for rule in self.rules:
            if rule.get("template") not in (None, request.template):
                continue
            if rule.get("model") not in (None, request.model_id):
                continue
            needles = rule.get("contains", [])
            if isinstance(needles, str):
                needles = [needles]
            if all(n in prompt for n in needles):
                return rule["response"]
        raise BackendUnavailable(
            f"no fixture for {request.template or 'prompt'} (key {request.fixture_key}, hash {request.prompt_hash})"
        )


class ReplayBackend:
    """Answers from a previously written transcript without contacting anything."""

    max_in_flight = 64

    def __init__(self, entries: Mapping[tuple[str, str], str]):
        self.entries = dict(entries)

    @classmethod
    def from_transcript(cls, path: str | Path) -> "ReplayBackend":
        entries: dict[tuple[str, str], str] = {}
        for record in read_transcript(path):
            if record.get("kind") != "generation":
                continue
            key = (record["model_id"], prompt_hash(record.get("system"), record["prompt"]))
            entries.setdefault(key, record["response"])
        return cls(entries)

    def generate(self, request: GenerationRequest) -> str:
        try:
            return self.entries[(request.model_id, request.prompt_hash)]
        except KeyError:
            raise BackendUnavailable(f"prompt {request.prompt_hash} not in replay transcript") from None


class HttpChatBackend:
    """Chat-completion style JSON endpoint.

    Posts ``{"model", "messages", "temperature", "max_tokens"}`` and reads
    ``choices[0].message.content`` from the reply.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        auth_header: str = "Authorization",
        timeout: float = 60.0,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.auth_header = auth_header
        self.max_in_flight = max_in_flight
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        if not self.api_key:
            return {}
        if self.auth_header.lower() == "authorization":
            return {self.auth_header: f"Bearer {self.api_key}"}
        return {self.auth_header: self.api_key}

    def generate(self, request: GenerationRequest) -> str:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        try:
            reply = self._client.post(self.endpoint, json=payload, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if reply.status_code == 429 or reply.status_code >= 500:
            raise TransportError(f"HTTP {reply.status_code} from {self.endpoint}")
        if reply.status_code >= 400:
            raise BackendUnavailable(f"HTTP {reply.status_code} from {self.endpoint}: {reply.text[:200]}")
        try:
            return reply.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc


def read_transcript(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    if not path.exists():
        return
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


class Transcript:
    """Append-only JSONL sink shared by all workers of a run."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._seq = 0

    def append(self, record: dict[str, Any]) -> None:
        if self.path is None:
            return
        with self._lock:
            self._seq += 1
            line = json.dumps({"seq": self._seq, **record}, ensure_ascii=False)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


@dataclass
class RunScope:
    """Call accounting for one pipeline run."""

    budget: int | None = DEFAULT_CALL_BUDGET
    calls: int = 0
    by_stage: Counter = field(default_factory=Counter)


_current_scope: contextvars.ContextVar[RunScope | None] = contextvars.ContextVar("caafc_run_scope", default=None)


class Gateway:
    def __init__(
        self,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        call_budget: int | None = DEFAULT_CALL_BUDGET,
        repair_budget: int = 1,
        transcript: Transcript | str | Path | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.call_budget = call_budget
        self.repair_budget = repair_budget
        if not isinstance(transcript, Transcript):
            transcript = Transcript(transcript)
        self.transcript = transcript
        self.sleep = sleep
        self._backends: dict[str, Backend] = {}
        self._slots: dict[str, threading.BoundedSemaphore] = {}
        self._lock = threading.Lock()
        self.backend_calls: Counter = Counter()
        self.calls_by_stage: Counter = Counter()

    # -- registry --------------------------------------------------------

    def register(self, model_id: str, backend: Backend) -> None:
        self._backends[model_id] = backend
        self._slots[model_id] = threading.BoundedSemaphore(max(1, getattr(backend, "max_in_flight", 4)))

    def backend(self, model_id: str) -> Backend:
        try:
            return self._backends[model_id]
        except KeyError:
            raise BackendUnavailable(f"no backend registered for model {model_id!r}") from None

    @property
    def models(self) -> list[str]:
        return sorted(self._backends)

    # -- accounting ------------------------------------------------------

    @contextlib.contextmanager
    def run_scope(self, budget: int | None | object = ...) -> Iterator[RunScope]:
        scope = RunScope(budget=self.call_budget if budget is ... else budget)
        token = _current_scope.set(scope)
        try:
            yield scope
        finally:
            _current_scope.reset(token)

    def _charge(self, request: GenerationRequest) -> None:
        scope = _current_scope.get()
        if scope is not None:
            if scope.budget is not None and scope.calls >= scope.budget:
                raise BudgetExceeded(f"run exceeded its budget of {scope.budget} model calls")
            scope.calls += 1
            scope.by_stage[request.stage] += 1
        with self._lock:
            self.calls_by_stage[request.stage] += 1

    # -- calls -----------------------------------------------------------

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        backend = self.backend(request.model_id)
        self._charge(request)
        slot = self._slots[request.model_id]
        attempt = 0
        while True:
            attempt += 1
            start = time.perf_counter()
            try:
                with slot:
                    with self._lock:
                        self.backend_calls[request.model_id] += 1
                    text = backend.generate(request)
            except TransportError as exc:
                if attempt > self.max_retries:
                    raise BackendUnavailable(
                        f"{request.model_id}: giving up after {attempt} attempts ({exc})"
                    ) from exc
                delay = self.backoff_base * 2 ** (attempt - 1)
                logger.warning("transport failure on %s (attempt %d): %s", request.model_id, attempt, exc)
                self.sleep(delay)
                continue
            latency = time.perf_counter() - start
            response = GenerationResponse(raw_text=text, model_id=request.model_id, latency=latency, attempt=attempt)
            self.transcript.append(
                {
                    "kind": "generation",
                    "stage": request.stage,
                    "template": request.template,
                    "model_id": request.model_id,
                    "fixture_key": request.fixture_key,
                    "system": request.system_text,
                    "prompt": request.user_text,
                    "response": text,
                    "latency": round(latency, 6),
                    "attempt": attempt,
                }
            )
            return response

    def complete_structured(self, request: GenerationRequest, schema_name: str, repair_budget: int | None = None) -> Any:
        """Call the model and parse its answer, re-prompting on malformed output."""
        if repair_budget is None:
            repair_budget = self.repair_budget
        if repair_budget < 0:
            raise ValueError("repair_budget must be >= 0")
        attempts: list[str] = []
        current = request
        for repair in range(repair_budget + 1):
            response = self.complete(current)
            attempts.append(response.raw_text)
            try:
                return extract_json(response.raw_text, schema_name)
            except (NoJsonFound, SchemaViolation) as exc:
                logger.info("unusable %s output from %s: %s", schema_name, request.model_id, exc)
            current = GenerationRequest(
                model_id=request.model_id,
                user_text=f"{request.user_text}\n\n{REPAIR_SUFFIX}",
                system_text=request.system_text,
                max_output=request.max_output,
                tags=request.tags,
                template=request.template,
                fixture_key=f"{request.fixture_key}.repair{repair + 1}" if request.fixture_key else None,
            )
        raise StructuredOutputFailure(
            f"{request.model_id} produced no valid {schema_name} in {len(attempts)} attempts", attempts
        )

    def ask(
        self,
        template: PromptTemplate,
        bindings: Mapping[str, str],
        model_id: str,
        schema_name: str,
        stage: str,
        repair_budget: int | None = None,
        max_output: int = 1024,
    ) -> Any:
        """Render ``template`` and return the structured answer of ``model_id``."""
        request = GenerationRequest(
            model_id=model_id,
            user_text=render(template, bindings),
            system_text=template.system,
            max_output=max_output,
            tags=(stage, template.name),
            template=template.name,
            fixture_key=fixture_key(template.name, bindings),
        )
        return self.complete_structured(request, schema_name, repair_budget)
