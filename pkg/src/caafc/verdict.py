"""Per-subclaim verdicts and their aggregation into a final verdict."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyInput, InvalidInput, InvariantViolation, VerdictCountMismatch
from .gateway import Gateway, GenerationRequest, fixture_key
from .prompts import load_template, render
from .retrieval import EvidenceBundle
from .segmenter import AtomicClaim, normalize_claim_text


class VerdictLabel(str, enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNVERIFIABLE = "unverifiable"

    def __str__(self) -> str:
        return self.value


# aggregation order: false < unverifiable < true
LABEL_RANK = {VerdictLabel.FALSE: 0, VerdictLabel.UNVERIFIABLE: 1, VerdictLabel.TRUE: 2}


@dataclass(frozen=True)
class SubclaimVerdict:
    subclaim_text: str
    label: VerdictLabel
    justification: str

    def __post_init__(self):
        object.__setattr__(self, "label", VerdictLabel(self.label))
        if not self.justification.strip():
            raise InvalidInput(f"verdict for {self.subclaim_text!r} lacks a justification")

    def to_dict(self) -> dict:
        return {"text": self.subclaim_text, "label": self.label.value, "justification": self.justification}

    @classmethod
    def from_dict(cls, data) -> "SubclaimVerdict":
        return cls(data.get("text") or data["subclaim_text"], VerdictLabel(str(data["label"]).lower()), data["justification"])


def aggregate(labels: Iterable[VerdictLabel | str]) -> VerdictLabel:
    """Fold subclaim labels into one verdict.

    Any false subclaim makes the claim false; otherwise any unverifiable
    subclaim makes it unverifiable; only an all-true list is true.
    """
    labels = [VerdictLabel(label) for label in labels]
    if not labels:
        raise EmptyInput("cannot aggregate an empty list of labels")
    verdict = VerdictLabel.TRUE
    for label in labels:
        if label is VerdictLabel.FALSE:
            return VerdictLabel.FALSE
        if label is VerdictLabel.UNVERIFIABLE:
            verdict = VerdictLabel.UNVERIFIABLE
    return verdict


@dataclass(frozen=True)
class FinalVerdict:
    label: VerdictLabel
    subclaim_verdicts: tuple[SubclaimVerdict, ...]

    def __post_init__(self):
        object.__setattr__(self, "subclaim_verdicts", tuple(self.subclaim_verdicts))
        object.__setattr__(self, "label", VerdictLabel(self.label))
        expected = aggregate(v.label for v in self.subclaim_verdicts)
        if self.label is not expected:
            raise InvariantViolation(f"final label {self.label} but subclaims aggregate to {expected}")

    @classmethod
    def from_subclaims(cls, verdicts: Sequence[SubclaimVerdict]) -> "FinalVerdict":
        return cls(aggregate(v.label for v in verdicts), tuple(verdicts))

    @property
    def false_subclaims(self) -> list[SubclaimVerdict]:
        return [v for v in self.subclaim_verdicts if v.label is VerdictLabel.FALSE]


def hallucination_label(label: VerdictLabel, unverifiable_as: str = "false") -> str | None:
    """Binary dialogue label for a verdict.

    ``unverifiable_as="false"`` counts an ungrounded dialogue as hallucinated;
    ``"abstain"`` returns ``None`` so the caller can leave it out of metrics.
    """
    label = VerdictLabel(label)
    if label is VerdictLabel.TRUE:
        return "factual"
    if label is VerdictLabel.FALSE:
        return "hallucination"
    if unverifiable_as == "abstain":
        return None
    return hallucination_label(VerdictLabel(unverifiable_as))


def binary_label(label: VerdictLabel, unverifiable_as: str = "false") -> VerdictLabel | None:
    """Collapse a three-way verdict onto a true/false benchmark."""
    label = VerdictLabel(label)
    if label is not VerdictLabel.UNVERIFIABLE:
        return label
    if unverifiable_as == "abstain":
        return None
    return VerdictLabel(unverifiable_as)


def _match(claims: Sequence[AtomicClaim], entries: list[dict]):
    """Pair model entries with atomic claims.

    Exact matches on the normalised text come first; when the same number of
    claims and entries remain unmatched they are paired in order.
    """
    pool: dict[str, list[int]] = {}
    for i, entry in enumerate(entries):
        pool.setdefault(normalize_claim_text(entry["text"]), []).append(i)
    assigned: dict[int, int] = {}
    for c, claim in enumerate(claims):
        candidates = pool.get(normalize_claim_text(claim.text))
        if candidates:
            assigned[c] = candidates.pop(0)
    used = set(assigned.values())
    loose_claims = [c for c in range(len(claims)) if c not in assigned]
    loose_entries = [i for i in range(len(entries)) if i not in used]
    if len(loose_claims) == len(loose_entries):
        assigned.update(zip(loose_claims, loose_entries))
        missing, extra = [], []
    else:
        missing = [claims[c].text for c in loose_claims]
        extra = [entries[i]["text"] for i in loose_entries]
    verdicts = [
        SubclaimVerdict(claims[c].text, VerdictLabel(entries[assigned[c]]["label"]), entries[assigned[c]]["justification"])
        for c in range(len(claims))
        if c in assigned
    ]
    return verdicts, missing, extra


def check_subclaims(
    gateway: Gateway,
    atomic_claims: Sequence[AtomicClaim],
    bundle: EvidenceBundle,
    model_id: str,
    repair_budget: int | None = None,
) -> list[SubclaimVerdict]:
    """Label every atomic claim against the evidence narrative only.

    A verdict list whose size disagrees with the claims gets one targeted
    re-prompt naming the missing and unexpected entries before failing.
    """
    if not atomic_claims:
        raise InvalidInput("check_subclaims needs at least one atomic claim")
    if not bundle.narrative.strip():
        raise InvalidInput("evidence narrative is empty")
    template = load_template("fact_check")
    bindings = {
        "claim": json.dumps([c.text for c in atomic_claims], ensure_ascii=False),
        "evidence": bundle.narrative,
    }
    value = gateway.ask(template, bindings, model_id=model_id, schema_name="verdict_object", stage="fact_check",
                        repair_budget=repair_budget)
    verdicts, missing, extra = _match(atomic_claims, value["subclaims"])
    if not (missing or extra):
        return verdicts

    note = (
        "\n\nYour previous answer did not contain exactly one entry per sub-claim."
        f"\nSub-claims without a verdict: {json.dumps(missing, ensure_ascii=False)}"
        f"\nEntries that match no sub-claim: {json.dumps(extra, ensure_ascii=False)}"
        "\nReturn one entry for each sub-claim listed above, using its exact text."
    )
    retry = GenerationRequest(
        model_id=model_id,
        user_text=render(template, bindings) + note,
        system_text=template.system,
        tags=("fact_check", template.name),
        template=template.name,
        fixture_key=fixture_key(template.name, bindings) + ".recount",
    )
    value = gateway.complete_structured(retry, "verdict_object", repair_budget)
    verdicts, missing, extra = _match(atomic_claims, value["subclaims"])
    if missing or extra:
        raise VerdictCountMismatch(missing, extra)
    return verdicts
