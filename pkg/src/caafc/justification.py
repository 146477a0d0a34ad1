"""Actionable justifications and the score-gated revision loop."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence
from urllib.parse import urlsplit

from .actionability import (
    DEFAULT_THRESHOLD,
    ActionabilityScore,
    LinkProbeResult,
    RevisionFeedback,
    score as score_justification,
    synthesize_feedback,
)
from .errors import InvalidInput, NoJsonFound, SchemaViolation, StructuredOutputFailure
from .gateway import Gateway, GenerationRequest, fixture_key
from .prompts import load_template, render
from .retrieval import EvidenceBundle
from .structured import extract_json
from .verdict import FinalVerdict, SubclaimVerdict, VerdictLabel, aggregate

__all__ = ["Justification", "RevisionFeedback", "RefineResult", "justify", "revise", "refine_loop", "cited_urls"]

_URL = re.compile(r"https?://[^\s<>\"'`()\[\]]+")
_CORRECTED = re.compile(r"corrected (?:version|claim)[^'\"“‘]*?(?:is|:|would be|reads)\s*['\"“‘]", re.IGNORECASE)


@dataclass(frozen=True)
class Justification:
    text: str
    corrected_claim: str | None = None
    cited_urls: tuple[str, ...] = ()
    revision: int = 0

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise InvalidInput("justification text must be non-empty")
        if self.revision < 0:
            raise InvalidInput("revision must be >= 0")
        object.__setattr__(self, "cited_urls", tuple(self.cited_urls))

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "corrected_claim": self.corrected_claim,
            "cited_urls": list(self.cited_urls),
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data) -> "Justification":
        return cls(
            text=data.get("text") or data["justification"],
            corrected_claim=data.get("corrected_claim"),
            cited_urls=tuple(data.get("cited_urls", ())),
            revision=int(data.get("revision", 0)),
        )


def cited_urls(text: str, bundle: EvidenceBundle | None = None) -> tuple[str, ...]:
    """URLs written in ``text`` plus bundle URLs whose host the text mentions."""
    found = [u.rstrip(".,;:!?") for u in _URL.findall(text)]
    if bundle is not None:
        lowered = text.lower()
        for url in bundle.urls:
            host = urlsplit(url).hostname or ""
            bare = host[4:] if host.startswith("www.") else host
            if bare and bare in lowered:
                found.append(url)
    return tuple(dict.fromkeys(found))


def corrected_from_text(text: str) -> str | None:
    """Pull the quoted corrected claim out of prose like "The corrected version ... is '...'"."""
    m = _CORRECTED.search(text)
    if not m:
        return None
    opener = text[m.end() - 1]
    closer = {"“": "”", "‘": "’"}.get(opener, opener)
    rest = text[m.end():]
    end = rest.rfind(closer)
    if end <= 0:
        return None
    return rest[:end].strip() or None


def justify(
    gateway: Gateway,
    claim_text: str,
    bundle: EvidenceBundle,
    verdicts: Sequence[SubclaimVerdict],
    model_id: str,
    repair_budget: int | None = None,
) -> Justification:
    """Integrate subclaim verdicts into one actionable justification (revision 0)."""
    if not verdicts:
        raise InvalidInput("justify needs at least one subclaim verdict")
    bindings = {
        "claim": claim_text,
        "evidence": bundle.narrative,
        "json_object": json.dumps({"subclaims": [v.to_dict() for v in verdicts]}, ensure_ascii=False),
    }
    value = gateway.ask(load_template("justify"), bindings, model_id=model_id, schema_name="justification_object",
                        stage="justify", repair_budget=repair_budget)
    text = value["justification"].strip()
    corrected = value.get("corrected_claim") or corrected_from_text(text)
    if corrected is None and aggregate(v.label for v in verdicts) is VerdictLabel.TRUE:
        corrected = claim_text
    return Justification(text=text, corrected_claim=corrected, cited_urls=cited_urls(text, bundle), revision=0)


def _revised_text(raw: str) -> str:
    try:
        value = extract_json(raw, "justification_object")
        return value["justification"].strip()
    except (NoJsonFound, SchemaViolation):
        return raw.strip().strip("`").strip()


def revise(
    gateway: Gateway,
    justification: Justification,
    feedback: RevisionFeedback,
    model_id: str,
    bundle: EvidenceBundle | None = None,
) -> Justification:
    """Rewrite ``justification`` to address ``feedback``; the evidence is not re-sent."""
    if feedback.is_empty():
        raise InvalidInput("revise called with empty feedback")
    template = load_template("revise")
    bindings = {"justification": justification.text, "feedback": feedback.render()}
    request = GenerationRequest(
        model_id=model_id,
        user_text=render(template, bindings),
        system_text=template.system,
        tags=("revise", template.name),
        template=template.name,
        fixture_key=fixture_key(template.name, bindings),
    )
    raw = gateway.complete(request).raw_text
    text = _revised_text(raw)
    if not text:
        raise StructuredOutputFailure(f"{model_id} returned an empty revision", [raw])
    urls = tuple(dict.fromkeys(justification.cited_urls + cited_urls(text, bundle)))
    return Justification(
        text=text,
        corrected_claim=corrected_from_text(text) or justification.corrected_claim,
        cited_urls=urls,
        revision=justification.revision + 1,
    )


@dataclass
class RefineResult:
    justification: Justification
    score: ActionabilityScore
    below_threshold: bool
    revisions: int = 0
    history: list[dict] = field(default_factory=list)


def refine_loop(
    gateway: Gateway,
    claim_text: str,
    bundle: EvidenceBundle,
    verdicts: Sequence[SubclaimVerdict],
    final: FinalVerdict,
    max_iterations: int = 3,
    *,
    justifier_model: str,
    judge_model: str | None = None,
    revisory_model: str | None = None,
    prober=None,
    threshold: int = DEFAULT_THRESHOLD,
    repair_budget: int | None = None,
) -> RefineResult:
    """Justify, then score → feedback → revise until the threshold or the budget is hit.

    True verdicts skip the gate: a correct claim has nothing actionable to fix.
    The best-scoring justification seen is returned (earliest on ties).
    """
    if max_iterations < 0:
        raise InvalidInput("max_iterations must be >= 0")
    judge_model = judge_model or justifier_model
    revisory_model = revisory_model or justifier_model

    def evaluate(j: Justification) -> ActionabilityScore:
        probes: list[LinkProbeResult] = prober.probe_links(j.cited_urls) if prober is not None and j.cited_urls else []
        if probes:
            gateway.transcript.append({"kind": "probe", "results": [p.to_dict() for p in probes]})
        return score_justification(gateway, claim_text, j, verdicts, probes, judge_model, threshold, repair_budget)

    current = justify(gateway, claim_text, bundle, verdicts, justifier_model, repair_budget)
    current_score = evaluate(current)
    history = [{"revision": 0, "justification": current.to_dict(), "score": current_score.to_dict(), "feedback": None}]
    best, best_score = current, current_score

    if final.label is VerdictLabel.TRUE:
        _log(gateway, claim_text, history)
        return RefineResult(current, current_score, below_threshold=False, revisions=0, history=history)

    revisions = 0
    while not current_score.passed and revisions < max_iterations:
        feedback = synthesize_feedback(current_score)
        history[-1]["feedback"] = {
            "missing_errors": feedback.missing_errors,
            "missing_corrections": feedback.missing_corrections,
            "link_issues": feedback.link_issues,
        }
        current = revise(gateway, current, feedback, revisory_model, bundle)
        revisions += 1
        current_score = evaluate(current)
        history.append({"revision": current.revision, "justification": current.to_dict(),
                        "score": current_score.to_dict(), "feedback": None})
        if current_score.total > best_score.total:
            best, best_score = current, current_score

    _log(gateway, claim_text, history)
    return RefineResult(best, best_score, below_threshold=not best_score.passed, revisions=revisions, history=history)


def _log(gateway: Gateway, claim_text: str, history: list[dict]) -> None:
    gateway.transcript.append({"kind": "refine", "claim": claim_text, "history": history})
