"""Claim extraction and decomposition into atomic claims."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Sequence

from .errors import EmptyDialogue, EmptyExtraction, InvalidInput
from .gateway import Gateway
from .prompts import load_template

SPEAKER_TAG = re.compile(r"\[([^\[\]\n]+?)(\d+)\]:[ \t]?")
_LIST_MARKUP = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s+")
_TRAILING_PUNCT = ".,;:!?"


def normalize_claim_text(text: str) -> str:
    """Matching key: case-folded, whitespace collapsed, trailing punctuation dropped."""
    return " ".join(text.split()).casefold().rstrip(_TRAILING_PUNCT).rstrip()


@dataclass(frozen=True)
class ClaimInput:
    id: str
    text: str
    kind: Literal["claim", "dialogue"] = "claim"
    claim_date: dt.date | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("claim", "dialogue"):
            raise InvalidInput(f"unknown input kind {self.kind!r}")
        if not self.text or not self.text.strip():
            raise InvalidInput(f"input {self.id!r} has empty text")
        if self.kind == "dialogue" and len(SPEAKER_TAG.findall(self.text)) < 2:
            raise InvalidInput(f"dialogue {self.id!r} needs at least two speaker-tagged turns")
        if isinstance(self.claim_date, str):
            object.__setattr__(self, "claim_date", dt.date.fromisoformat(self.claim_date))


@dataclass(frozen=True)
class AtomicClaim:
    index: int
    text: str

    def __post_init__(self):
        if self.index < 0:
            raise InvalidInput("atomic claim index must be >= 0")
        if not self.text.strip():
            raise InvalidInput("atomic claim text must be non-empty")


def normalize_dialogue(turns: Sequence[tuple[str, str]], id: str = "dialogue", **kwargs) -> ClaimInput:
    """Format ``(speaker, utterance)`` turns as ``[A1]: ...`` lines.

    Turns are numbered per speaker, so two speakers alternating give
    ``[A1] [B1] [A2] [B2]``.
    """
    if not turns:
        raise EmptyDialogue("dialogue has no turns")
    seen: dict[str, int] = {}
    lines = []
    for speaker, utterance in turns:
        seen[speaker] = seen.get(speaker, 0) + 1
        lines.append(f"[{speaker}{seen[speaker]}]: {utterance}")
    return ClaimInput(id=id, text="\n".join(lines), kind="dialogue", **kwargs)


def parse_dialogue(text: str) -> list[tuple[str, str]]:
    """Inverse of :func:`normalize_dialogue`: recover ``(speaker, utterance)`` pairs."""
    matches = list(SPEAKER_TAG.finditer(text))
    turns = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        utterance = text[m.end():end]
        if utterance.endswith("\n"):
            utterance = utterance[:-1]
        turns.append((m.group(1), utterance))
    return turns


def _clean(item: Any) -> str:
    text = item.get("text", "") if isinstance(item, dict) else str(item)
    text = _LIST_MARKUP.sub("", text)
    text = SPEAKER_TAG.sub("", text)
    return " ".join(text.split())


def dedupe_claims(texts: Iterable[str]) -> list[AtomicClaim]:
    claims: list[AtomicClaim] = []
    seen: set[str] = set()
    for text in texts:
        key = normalize_claim_text(text)
        if not key or key in seen:
            continue
        seen.add(key)
        claims.append(AtomicClaim(index=len(claims), text=text))
    return claims


def segment(gateway: Gateway, claim: ClaimInput, model_id: str, repair_budget: int | None = None) -> list[AtomicClaim]:
    """Extract every claim in ``claim.text`` as a list of atomic claims.

    Duplicates are dropped (first occurrence wins). An empty extraction is an
    error rather than a vacuous pass.
    """
    value = gateway.ask(
        load_template("segment"),
        {"text": claim.text},
        model_id=model_id,
        schema_name="subclaim_list",
        stage="segment",
        repair_budget=repair_budget,
    )
    items = value["subclaims"] if isinstance(value, dict) else value
    claims = dedupe_claims(_clean(item) for item in items)
    if not claims:
        raise EmptyExtraction(f"no claims extracted from {claim.id!r}")
    return claims
