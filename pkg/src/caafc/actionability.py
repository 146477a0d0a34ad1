"""Actionability rubric: error detection, error correction and link quality.

The two error criteria (0-2 each) come from a judge model. The link criterion
(0-3) combines mechanical probing with the judge's view: no working link
scores 0, a working link scores 1, a relevant working link 2, and links that
fully support the justification 3 (every cited link must then work).
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import httpx

from .errors import InvalidInput, InvariantViolation
from .gateway import Gateway
from .prompts import load_template

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 4
MAX_TOTAL = 7


@dataclass(frozen=True)
class ActionabilityScore:
    error_detection: int
    error_correction: int
    link_score: int
    threshold: int = DEFAULT_THRESHOLD
    functional_links: int | None = None
    rationales: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name, top in (("error_detection", 2), ("error_correction", 2), ("link_score", 3)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= top:
                raise InvalidInput(f"{name} must be an integer in 0..{top}, got {value!r}")
        if not 0 <= self.threshold <= MAX_TOTAL:
            raise InvalidInput("threshold must lie in 0..7")
        if self.functional_links is not None and self.link_score >= 1 and self.functional_links < 1:
            raise InvalidInput(f"link_score {self.link_score} needs at least one working link")

    @property
    def total(self) -> int:
        return self.error_detection + self.error_correction + self.link_score

    @property
    def passed(self) -> bool:
        return self.total >= self.threshold

    def to_dict(self) -> dict:
        return {
            "error_detection": self.error_detection,
            "error_correction": self.error_correction,
            "link_score": self.link_score,
            "total": self.total,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class LinkProbeResult:
    url: str
    functional: bool
    status: int | str  # HTTP status, or "timeout" / "error" / "too_many_redirects"
    probed_at: dt.datetime | None = None

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "functional": self.functional,
            "status": self.status,
            "probed_at": self.probed_at.isoformat() if self.probed_at else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LinkProbeResult":
        stamp = data.get("probed_at")
        return cls(data["url"], data["functional"], data["status"], dt.datetime.fromisoformat(stamp) if stamp else None)


@dataclass(frozen=True)
class RevisionFeedback:
    missing_errors: str = ""
    missing_corrections: str = ""
    link_issues: str = ""
    source_score: ActionabilityScore | None = None

    def is_empty(self) -> bool:
        return not (self.missing_errors or self.missing_corrections or self.link_issues)

    def render(self) -> str:
        lines = []
        if self.missing_errors:
            lines.append(f"Unmentioned errors: {self.missing_errors}")
        if self.missing_corrections:
            lines.append(f"Missing corrections: {self.missing_corrections}")
        if self.link_issues:
            lines.append(f"Source links: {self.link_issues}")
        return "\n".join(lines)


# -- link probing ------------------------------------------------------------


class LinkProber:
    """Checks that cited URLs resolve, with bounded concurrency and a daily cache.

    A link works when its final status, after at most ``max_redirects``
    redirects, lies in 200..399. HEAD is tried first; a 405 falls back to GET.
    """

    def __init__(
        self,
        timeout: float = 10.0,
        max_redirects: int = 5,
        concurrency: int = 8,
        cache_dir: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
        today: Callable[[], dt.date] = dt.date.today,
        clock: Callable[[], dt.datetime] = lambda: dt.datetime.now(dt.timezone.utc),
    ):
        self.timeout = timeout
        self.max_redirects = max_redirects
        self.concurrency = concurrency
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.transport = transport
        self.today = today
        self.clock = clock
        self.requests_made = 0
        self._cache: dict[tuple[str, dt.date], LinkProbeResult] = {}
        self._lock = threading.Lock()

    def _client(self) -> httpx.Client:
        return httpx.Client(
            timeout=self.timeout,
            follow_redirects=True,
            max_redirects=self.max_redirects,
            transport=self.transport,
        )

    def _probe_one(self, client: httpx.Client, url: str) -> LinkProbeResult:
        try:
            with self._lock:
                self.requests_made += 1
            reply = client.head(url)
            if reply.status_code == 405:
                with self._lock:
                    self.requests_made += 1
                reply = client.get(url)
            status: int | str = reply.status_code
        except httpx.TimeoutException:
            status = "timeout"
        except httpx.TooManyRedirects:
            status = "too_many_redirects"
        except httpx.HTTPError as exc:
            logger.info("probe of %s failed: %s", url, exc)
            status = "error"
        functional = isinstance(status, int) and 200 <= status <= 399
        return LinkProbeResult(url=url, functional=functional, status=status, probed_at=self.clock())

    def _disk_path(self, day: dt.date) -> Path | None:
        return self.cache_dir / f"probes-{day.isoformat()}.json" if self.cache_dir is not None else None

    def _load_disk(self, day: dt.date) -> dict[str, LinkProbeResult]:
        path = self._disk_path(day)
        if path is None or not path.is_file():
            return {}
        return {url: LinkProbeResult.from_dict(d) for url, d in json.loads(path.read_text("utf-8")).items()}

    def _save_disk(self, day: dt.date) -> None:
        path = self._disk_path(day)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        data = {url: r.to_dict() for (url, d), r in self._cache.items() if d == day}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True), "utf-8")
        tmp.replace(path)

    def probe_links(self, urls: Iterable[str]) -> list[LinkProbeResult]:
        urls = list(urls)
        day = self.today()
        with self._lock:
            if self.cache_dir is not None:
                for url, result in self._load_disk(day).items():
                    self._cache.setdefault((url, day), result)
            todo = list(dict.fromkeys(u for u in urls if (u, day) not in self._cache))
        if todo:
            with self._client() as client, ThreadPoolExecutor(max_workers=max(1, self.concurrency)) as pool:
                results = list(pool.map(lambda u: self._probe_one(client, u), todo))
            with self._lock:
                for result in results:
                    self._cache[(result.url, day)] = result
                self._save_disk(day)
        return [self._cache[(u, day)] for u in urls]


class ReplayProber:
    """Serves probe results recorded in a run transcript; unknown URLs count as broken."""

    def __init__(self, results: Mapping[str, LinkProbeResult]):
        self.results = dict(results)

    @classmethod
    def from_transcript(cls, path: str | Path) -> "ReplayProber":
        from .gateway import read_transcript

        found: dict[str, LinkProbeResult] = {}
        for record in read_transcript(path):
            if record.get("kind") == "probe":
                for item in record["results"]:
                    found.setdefault(item["url"], LinkProbeResult.from_dict(item))
        return cls(found)

    def probe_links(self, urls: Iterable[str]) -> list[LinkProbeResult]:
        return [self.results.get(u) or LinkProbeResult(u, False, "error") for u in urls]


def static_transport(statuses: Mapping[str, int | str], default: int = 404) -> httpx.MockTransport:
    """Offline transport answering each URL with a fixed status (``"timeout"`` simulates a timeout)."""

    def handler(request: httpx.Request) -> httpx.Response:
        status = statuses.get(str(request.url), default)
        if status == "timeout":
            raise httpx.ReadTimeout("simulated timeout", request=request)
        return httpx.Response(int(status))

    return httpx.MockTransport(handler)


# -- scoring -----------------------------------------------------------------


def link_level(cited_urls: Sequence[str], probes: Sequence[LinkProbeResult], relevant: bool, supportive: bool) -> int:
    """Link criterion from probe results and the judge's relevance verdicts."""
    status = {p.url: p.functional for p in probes}
    working = [u for u in dict.fromkeys(cited_urls) if status.get(u, False)]
    if not working:
        return 0
    if not (relevant or supportive):
        return 1
    if supportive and len(working) == len(set(cited_urls)):
        return 3
    return 2


def score(
    gateway: Gateway,
    claim_text: str,
    justification,
    verdicts: Sequence,
    probes: Sequence[LinkProbeResult],
    model_id: str,
    threshold: int = DEFAULT_THRESHOLD,
    repair_budget: int | None = None,
) -> ActionabilityScore:
    """Grade ``justification`` (any object with ``text`` and ``cited_urls``)."""
    cited = list(justification.cited_urls)
    status = {p.url: p.functional for p in probes}
    working = [u for u in dict.fromkeys(cited) if status.get(u, False)]
    false_subclaims = [v.subclaim_text for v in verdicts if str(v.label) == "false"]
    bindings = {
        "claim": claim_text,
        "false_subclaims": "\n".join(f"- {t}" for t in false_subclaims) or "none",
        "justification": justification.text,
        "links": "\n".join(working) or "none",
    }
    judged = gateway.ask(load_template("judge"), bindings, model_id=model_id, schema_name="judge_object",
                         stage="judge", repair_budget=repair_budget)
    level = link_level(cited, probes, judged["links_relevant"], judged["links_supportive"])
    return ActionabilityScore(
        error_detection=judged["error_detection"],
        error_correction=judged["error_correction"],
        link_score=level,
        threshold=threshold,
        functional_links=len(working),
        rationales={
            "error_detection": judged.get("error_detection_rationale", ""),
            "error_correction": judged.get("error_correction_rationale", ""),
            "links": judged.get("links_rationale", ""),
        },
    )


def synthesize_feedback(score: ActionabilityScore, judge_rationales: Mapping[str, str] | None = None) -> RevisionFeedback:
    """Turn each deficient criterion into a feedback field for the reviser."""
    if score.total == MAX_TOTAL:
        raise InvariantViolation("a perfect score leaves nothing to revise")
    rationales = dict(score.rationales)
    rationales.update(judge_rationales or {})
    missing_errors = missing_corrections = link_issues = ""
    if score.error_detection < 2:
        missing_errors = rationales.get("error_detection") or "Not every factual error in the claim is pointed out."
    if score.error_correction < 2:
        missing_corrections = rationales.get("error_correction") or "Not every identified error is given a correction."
    if score.link_score < 3:
        link_issues = rationales.get("links") or {
            0: "No working source link is cited.",
            1: "The cited links work but are not relevant to the justification.",
            2: "The cited links do not fully support the justification.",
        }[score.link_score]
    return RevisionFeedback(missing_errors, missing_corrections, link_issues, score)


# -- score distribution --------------------------------------------------------


def score_histogram(totals: Iterable[int]) -> list[tuple[int, float]]:
    """Density of totals over the bins 0..7."""
    counts = [0] * (MAX_TOTAL + 1)
    n = 0
    for total in totals:
        if not 0 <= int(total) <= MAX_TOTAL:
            raise InvalidInput(f"score total {total} outside 0..7")
        counts[int(total)] += 1
        n += 1
    if n == 0:
        raise InvalidInput("histogram needs at least one score")
    return [(b, c / n) for b, c in enumerate(counts)]


def write_histogram_csv(path: str | Path, totals: Iterable[int]) -> list[tuple[int, float]]:
    rows = score_histogram(totals)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "density"])
        writer.writerows(rows)
    return rows
