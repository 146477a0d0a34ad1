"""End-to-end composition: segment → evidence → verdicts → justification."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

from .actionability import DEFAULT_THRESHOLD, ActionabilityScore
from .errors import CAAFCError, InvalidInput, StageError
from .gateway import Gateway, sha16
from .justification import Justification, refine_loop
from .retrieval import (
    EvidenceBundle,
    EvidenceRetriever,
    PrimarySource,
    build_query,
    bundle_from_text,
    canonicalize,
    select_primary_sources,
)
from .segmenter import AtomicClaim, ClaimInput, segment
from .verdict import FinalVerdict, check_subclaims, hallucination_label

logger = logging.getLogger(__name__)

REPORT_VERSION = "1"
STAGES = ("segmenter", "sources", "fact_checker", "justifier", "revisory", "judge", "comparison")
_MODES = {"retrieved": "retrieved", "retrieved_evidence": "retrieved", "dataset": "dataset", "dataset_evidence": "dataset"}


def normalize_mode(mode: str) -> str:
    try:
        return _MODES[mode]
    except KeyError:
        raise InvalidInput(f"unknown evidence mode {mode!r}") from None


@dataclass
class VerifyResult:
    claim: ClaimInput
    mode: str
    atomic_claims: list[AtomicClaim]
    primary_sources: list[PrimarySource]
    query: str
    bundle: EvidenceBundle
    final: FinalVerdict
    timings: dict[str, float] = field(default_factory=dict)
    calls: dict[str, int] = field(default_factory=dict)


@dataclass
class PipelineReport:
    """Deterministic run summary; timestamps and latencies live in the manifest."""

    result: VerifyResult
    justification: Justification | None = None
    score: ActionabilityScore | None = None
    revisions: int = 0
    below_threshold: bool = False
    unverifiable_as: str = "false"
    manifest_id: str | None = None

    @property
    def label(self) -> str:
        return self.result.final.label.value

    def to_dict(self) -> dict:
        r = self.result
        out: dict[str, Any] = {
            "report_version": REPORT_VERSION,
            "claim_id": r.claim.id,
            "kind": r.claim.kind,
            "claim": r.claim.text,
            "claim_date": r.claim.claim_date.isoformat() if r.claim.claim_date else None,
            "mode": r.mode,
            "atomic_claims": [c.text for c in r.atomic_claims],
            "primary_sources": [s.descriptor for s in r.primary_sources],
            "query": r.query,
            "evidence": {
                "ref": sha16(r.bundle.narrative),
                "backend_id": r.bundle.backend_id,
                "items": [i.to_dict() for i in r.bundle.items],
            },
            "subclaim_verdicts": [v.to_dict() for v in r.final.subclaim_verdicts],
            "final_label": self.label,
            "call_counts": dict(sorted(r.calls.items())),
            "manifest_id": self.manifest_id,
        }
        if r.claim.kind == "dialogue":
            out["hallucination_label"] = hallucination_label(r.final.label, self.unverifiable_as)
        if self.justification is not None:
            out["justification"] = self.justification.to_dict()
        if self.score is not None:
            out["actionability"] = self.score.to_dict()
            out["refinement"] = {"revisions": self.revisions, "below_threshold": self.below_threshold}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)


class _Stage:
    """Times a stage and wraps any pipeline error with the stage name."""

    def __init__(self, name: str, timings: dict[str, float]):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = self.timings.get(self.name, 0.0) + time.perf_counter() - self.start
        if exc is not None and isinstance(exc, CAAFCError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


class Pipeline:
    """Wires the stages to a gateway, a retriever and per-stage model assignments."""

    def __init__(
        self,
        gateway: Gateway,
        models: Mapping[str, str],
        retriever: EvidenceRetriever | None = None,
        retrieval_backend: str = "default",
        prober=None,
        threshold: int = DEFAULT_THRESHOLD,
        max_revisions: int = 3,
        repair_budget: int | None = None,
        call_budget: int | None = ...,  # type: ignore[assignment]
        unverifiable_as: str = "false",
    ):
        unknown = set(models) - set(STAGES) - {"default"}
        if unknown:
            raise InvalidInput(f"unknown stages in model assignment: {sorted(unknown)}")
        self.gateway = gateway
        self.models = dict(models)
        self.retriever = retriever
        self.retrieval_backend = retrieval_backend
        self.prober = prober
        self.threshold = threshold
        self.max_revisions = max_revisions
        self.repair_budget = repair_budget
        self.call_budget = call_budget
        self.unverifiable_as = unverifiable_as

    def model(self, stage: str, override: str | None = None) -> str:
        if override:
            return override
        found = self.models.get(stage) or self.models.get("default")
        if not found:
            raise InvalidInput(f"no model assigned to stage {stage!r}")
        return found

    def _evidence(self, claim: ClaimInput, mode: str, evidence: str | None, atomic, override, timings):
        if mode == "dataset":
            text = evidence if evidence is not None else claim.metadata.get("evidence")
            with _Stage("evidence", timings):
                if not text:
                    raise InvalidInput(f"record {claim.id!r} carries no evidence for dataset mode")
                return [], "", bundle_from_text(text)
        if self.retriever is None:
            raise StageError("retrieve", InvalidInput("no retriever configured for retrieved-evidence mode"))
        with _Stage("sources", timings):
            sources = select_primary_sources(self.gateway, claim.text, self.model("sources", override), self.repair_budget)
        with _Stage("query", timings):
            query = build_query(atomic, claim.claim_date, sources)
        with _Stage("retrieve", timings):
            bundle = canonicalize(self.retriever.retrieve(query, self.retrieval_backend))
        return sources, query, bundle

    def _verify(self, claim: ClaimInput, mode: str, evidence: str | None, override: str | None, timings) -> VerifyResult:
        with _Stage("segment", timings):
            atomic = segment(self.gateway, claim, self.model("segmenter", override), self.repair_budget)
        sources, query, bundle = self._evidence(claim, mode, evidence, atomic, override, timings)
        with _Stage("fact_check", timings):
            verdicts = check_subclaims(self.gateway, atomic, bundle, self.model("fact_checker", override), self.repair_budget)
        with _Stage("aggregate", timings):
            final = FinalVerdict.from_subclaims(verdicts)
        return VerifyResult(claim, mode, atomic, sources, query, bundle, final, timings)

    def verify(self, claim: ClaimInput, mode: str = "retrieved", evidence: str | None = None,
               model: str | None = None) -> VerifyResult:
        """Verdict only (no justification). ``model`` sends every stage to one model."""
        mode = normalize_mode(mode)
        timings: dict[str, float] = {}
        with self.gateway.run_scope(**self._budget()) as scope:
            result = self._verify(claim, mode, evidence, model, timings)
        result.calls = dict(scope.by_stage)
        return result

    def retrieve_evidence(self, claim: ClaimInput) -> EvidenceBundle:
        """Fresh evidence for ``claim`` through the retrieval branch only."""
        timings: dict[str, float] = {}
        with self.gateway.run_scope(**self._budget()):
            with _Stage("segment", timings):
                atomic = segment(self.gateway, claim, self.model("segmenter"), self.repair_budget)
            return self._evidence(claim, "retrieved", None, atomic, None, timings)[2]

    def run(self, claim: ClaimInput, mode: str = "retrieved", evidence: str | None = None) -> PipelineReport:
        """Full pipeline including the justification refinement loop."""
        mode = normalize_mode(mode)
        timings: dict[str, float] = {}
        with self.gateway.run_scope(**self._budget()) as scope:
            result = self._verify(claim, mode, evidence, None, timings)
            with _Stage("justify", timings):
                refined = refine_loop(
                    self.gateway,
                    claim.text,
                    result.bundle,
                    list(result.final.subclaim_verdicts),
                    result.final,
                    self.max_revisions,
                    justifier_model=self.model("justifier"),
                    judge_model=self.model("judge"),
                    revisory_model=self.model("revisory"),
                    prober=self.prober,
                    threshold=self.threshold,
                    repair_budget=self.repair_budget,
                )
        result.calls = dict(scope.by_stage)
        return PipelineReport(
            result,
            justification=refined.justification,
            score=refined.score,
            revisions=refined.revisions,
            below_threshold=refined.below_threshold,
            unverifiable_as=self.unverifiable_as,
        )

    def _budget(self) -> dict:
        return {} if self.call_budget is ... else {"budget": self.call_budget}
