"""Benchmark ingestion, evidence hygiene and benchmark runs."""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import CAAFCError, InvalidInput, ParseError, StructuredOutputFailure, UnknownRawLabel
from .gateway import Gateway
from .metrics import ClassificationReport, classification_report
from .prompts import load_template
from .segmenter import ClaimInput, normalize_dialogue
from .verdict import VerdictLabel, binary_label

logger = logging.getLogger(__name__)

T, F, U = VerdictLabel.TRUE, VerdictLabel.FALSE, VerdictLabel.UNVERIFIABLE
WINNERS = ("evidence_1", "evidence_2", "tie")
REMOVED_FIELD = "caafc_removed_reason"


# -- adapters --------------------------------------------------------------------


@dataclass(frozen=True)
class Adapter:
    """Field names and the raw → canonical label map of one benchmark format."""

    id: str
    label_map: Mapping[str, VerdictLabel]
    text_fields: tuple[str, ...] = ("claim", "text")
    label_fields: tuple[str, ...] = ("label",)
    evidence_fields: tuple[str, ...] = ("evidence", "evidence_text")
    date_fields: tuple[str, ...] = ("claim_date", "date")
    kind: str = "claim"
    binary: bool = False
    # display names for benchmark reports: canonical label -> class name
    class_names: Mapping[VerdictLabel, str] | None = None

    def classes(self) -> list[str]:
        labels = [T, F] if self.binary else [T, F, U]
        return [self.display(l) for l in labels]

    def display(self, label: VerdictLabel) -> str:
        return (self.class_names or {}).get(label, label.value)

    def map_label(self, record_id: str, raw: Any) -> VerdictLabel:
        key = str(raw).strip().lower() if not isinstance(raw, bool) else str(raw).lower()
        try:
            return self.label_map[key]
        except KeyError:
            raise UnknownRawLabel(record_id, str(raw)) from None


ADAPTERS: dict[str, Adapter] = {
    "averitec": Adapter(
        "averitec",
        {
            "supported": T,
            "refuted": F,
            "not enough evidence": U,
            "conflicting evidence/cherrypicking": U,
        },
    ),
    "coverbench": Adapter("coverbench", {"true": T, "false": F}, text_fields=("claim", "statement", "text"), binary=True),
    "factors": Adapter(
        "factors",
        {"true": T, "false": F, "misleading": F, "partially true": F, "unverifiable": U},
        label_fields=("label", "verdict", "rating"),
    ),
    "dialogue_generic": Adapter(
        "dialogue_generic",
        {"factual": T, "hallucination": F},
        text_fields=("dialogue", "text", "turns"),
        evidence_fields=("knowledge", "evidence", "evidence_text"),
        kind="dialogue",
        binary=True,
        class_names={T: "factual", F: "hallucination"},
    ),
    "claim_generic": Adapter("claim_generic", {"true": T, "false": F, "unverifiable": U}),
}


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    input: ClaimInput
    gold_label_raw: str
    gold_label: VerdictLabel
    evidence_text: str | None = None
    split: str = "test"
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)


def _first(row: Mapping, names: Sequence[str]) -> Any:
    for name in names:
        if row.get(name) not in (None, ""):
            return row[name]
    return None


_DMY = re.compile(r"^(\d{1,2})-(\d{1,2})-(\d{4})$")


def _parse_date(value: Any) -> dt.date | None:
    if not value:
        return None
    text = str(value).strip()
    m = _DMY.match(text)
    try:
        if m:
            return dt.date(int(m.group(3)), int(m.group(2)), int(m.group(1)))
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        return None


def _evidence_text(value: Any) -> str | None:
    """Evidence may be a string, a list of strings, or question/answer pairs."""
    if value is None:
        return None
    if isinstance(value, str):
        return value
    parts = []
    for item in value:
        if isinstance(item, str):
            parts.append(item)
        elif isinstance(item, Mapping):
            q = item.get("question")
            answers = [a.get("answer", "") if isinstance(a, Mapping) else str(a) for a in item.get("answers", [])]
            text = item.get("text") or " ".join(a for a in answers if a)
            parts.append(f"{q} {text}".strip() if q else str(text))
    return "\n".join(p for p in parts if p) or None


def _dialogue_input(record_id: str, value: Any, **kw) -> ClaimInput:
    if isinstance(value, str):
        return ClaimInput(id=record_id, text=value, kind="dialogue", **kw)
    turns = []
    for turn in value:
        if isinstance(turn, Mapping):
            turns.append((str(turn.get("speaker", "A")), str(turn.get("text") or turn.get("utterance", ""))))
        else:
            turns.append((str(turn[0]), str(turn[1])))
    return normalize_dialogue(turns, id=record_id, **kw)


def record_from_row(row: Mapping[str, Any], adapter: Adapter | str, index: int = 0, split: str = "test") -> DatasetRecord:
    if isinstance(adapter, str):
        adapter = get_adapter(adapter)
    record_id = str(_first(row, ("id", "claim_id", "record_id")) or f"{adapter.id}-{index}")
    raw_label = _first(row, adapter.label_fields)
    if raw_label is None:
        raise UnknownRawLabel(record_id, "<missing>")
    gold = adapter.map_label(record_id, raw_label)
    text = _first(row, adapter.text_fields)
    if text is None:
        raise InvalidInput(f"record {record_id!r} has no text field among {adapter.text_fields}")
    evidence = _evidence_text(_first(row, adapter.evidence_fields))
    extra = {"claim_date": _parse_date(_first(row, adapter.date_fields)), "metadata": {"evidence": evidence} if evidence else {}}
    if adapter.kind == "dialogue":
        claim = _dialogue_input(record_id, text, **extra)
    else:
        claim = ClaimInput(id=record_id, text=str(text), **extra)
    return DatasetRecord(record_id, claim, str(raw_label), gold, evidence, str(row.get("split", split)), dict(row))


def get_adapter(adapter_id: str) -> Adapter:
    try:
        return ADAPTERS[adapter_id]
    except KeyError:
        raise InvalidInput(f"unknown dataset adapter {adapter_id!r}; known: {sorted(ADAPTERS)}") from None


def _rows(path: Path) -> Iterable[tuple[int, Mapping]]:
    text = path.read_text("utf-8")
    if path.suffix != ".jsonl":
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = None
        if data is not None:
            if isinstance(data, Mapping):
                data = data.get("records") or data.get("data") or [data]
            for i, row in enumerate(data, 1):
                yield i, row
            return
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})", line=lineno) from exc


def load_dataset(path: str | Path, adapter_id: str, split: str = "test") -> list[DatasetRecord]:
    """Read a JSONL (or JSON array) file and map its labels through the adapter."""
    adapter = get_adapter(adapter_id)
    path = Path(path)
    records = []
    for lineno, row in _rows(path):
        if not isinstance(row, Mapping):
            raise ParseError(f"{path}: record is not an object", line=lineno)
        records.append(record_from_row(row, adapter, index=len(records), split=split))
    return records


def label_counts(records: Iterable[DatasetRecord]) -> dict[str, int]:
    counts = Counter(r.gold_label.value for r in records)
    return {label.value: counts.get(label.value, 0) for label in VerdictLabel}


# -- evidence hygiene -----------------------------------------------------------


@dataclass(frozen=True)
class ComparisonVote:
    better_evidence: str
    reason_category: str
    reason: str
    model_id: str = ""

    def __post_init__(self):
        if self.better_evidence not in WINNERS:
            raise InvalidInput(f"better_evidence must be one of {WINNERS}")
        if self.reason_category not in ("more_context", "more_updated_information", "other"):
            raise InvalidInput(f"unknown reason_category {self.reason_category!r}")

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "better_evidence": self.better_evidence,
                "reason_category": self.reason_category, "reason": self.reason}


@dataclass
class MismatchFinding:
    record_id: str
    model_verdicts: dict[str, VerdictLabel]
    gold_label: VerdictLabel
    comparison_votes: list[ComparisonVote] = field(default_factory=list)
    comparison_winner: str | None = None

    def __post_init__(self):
        if len(self.model_verdicts) != 3:
            raise InvalidInput("a mismatch finding needs exactly three model verdicts")

    @property
    def consensus(self) -> VerdictLabel | None:
        labels = set(self.model_verdicts.values())
        return next(iter(labels)) if len(labels) == 1 else None

    @property
    def flagged(self) -> bool:
        return self.consensus is not None and self.consensus is not self.gold_label

    def to_dict(self) -> dict:
        out = {
            "record_id": self.record_id,
            "model_verdicts": {m: v.value for m, v in self.model_verdicts.items()},
            "consensus": self.consensus.value if self.consensus else None,
            "gold_label": self.gold_label.value,
            "flagged": self.flagged,
        }
        if self.comparison_votes or self.comparison_winner:
            out["comparison_winner"] = self.comparison_winner
            out["comparison_votes"] = [v.to_dict() for v in self.comparison_votes]
        return out


def _check_trio(model_ids: Sequence[str]) -> None:
    if len(model_ids) != 3 or len(set(model_ids)) != 3:
        raise InvalidInput("exactly three distinct models are required")


def detect_mismatches(
    pipeline,
    records: Sequence[DatasetRecord],
    model_ids: Sequence[str],
    skip_log: list[dict] | None = None,
    parallel: int = 1,
) -> list[MismatchFinding]:
    """Verify every record on its own evidence with three models.

    One finding per successfully verified record is returned; a record is
    flagged only when all three verdicts agree and contradict the gold label.
    Records whose verification fails are left out and noted in ``skip_log``.
    """
    _check_trio(model_ids)

    def run(record: DatasetRecord):
        if not record.evidence_text:
            return record, None, "record has no evidence text"
        verdicts = {}
        try:
            for model in model_ids:
                result = pipeline.verify(record.input, "dataset", record.evidence_text, model=model)
                verdicts[model] = result.final.label
        except CAAFCError as exc:
            return record, None, f"{type(exc).__name__}: {exc}"
        return record, MismatchFinding(record.id, verdicts, record.gold_label), None

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        outcomes = list(pool.map(run, records))
    findings = []
    for record, finding, error in outcomes:
        if finding is None:
            logger.warning("skipping %s: %s", record.id, error)
            if skip_log is not None:
                skip_log.append({"record_id": record.id, "error": error})
            continue
        findings.append(finding)
    return findings


def majority_vote(choices: Sequence[str]) -> str:
    """Winner among ``evidence_1``/``evidence_2``/``tie`` needs two votes; otherwise ``unresolved``."""
    counts = Counter(choices)
    for choice in WINNERS:
        if counts[choice] >= 2:
            return choice
    return "unresolved"


def compare_evidence(
    gateway: Gateway,
    claim: str,
    evidence_a: str,
    evidence_b: str,
    model_ids: Sequence[str],
    failures: list[dict] | None = None,
    repair_budget: int | None = None,
) -> tuple[str, list[ComparisonVote]]:
    """Ask three models which evidence better settles ``claim`` and take a 2-of-3 vote."""
    _check_trio(model_ids)
    if not evidence_a.strip() or not evidence_b.strip():
        raise InvalidInput("both evidence texts must be non-empty")
    template = load_template("compare")
    bindings = {"claim": claim, "evidence1": evidence_a, "evidence2": evidence_b}
    votes = []
    for model in model_ids:
        try:
            value = gateway.ask(template, bindings, model_id=model, schema_name="comparison_object",
                                stage="comparison", repair_budget=repair_budget)
        except StructuredOutputFailure as exc:
            logger.warning("comparison by %s failed: %s", model, exc)
            if failures is not None:
                failures.append({"model_id": model, "error": str(exc)})
            continue
        votes.append(ComparisonVote(value["better_evidence"], value["reason_category"], value["reason"], model))
    return majority_vote([v.better_evidence for v in votes]), votes


def removal_reason(finding: MismatchFinding) -> str:
    return (
        f"evidence chronological mismatch: models {', '.join(sorted(finding.model_verdicts))} "
        f"unanimously returned {finding.consensus.value} against gold {finding.gold_label.value}"
    )


def clean(records: Sequence[DatasetRecord], findings: Iterable[MismatchFinding]) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    """Split records into kept and removed; removed ones are those with a flagged finding."""
    flagged = {f.record_id for f in findings if f.flagged}
    kept = [r for r in records if r.id not in flagged]
    removed = [r for r in records if r.id in flagged]
    return kept, removed


def removed_rows(removed: Sequence[DatasetRecord], findings: Iterable[MismatchFinding]) -> list[dict]:
    """Original rows of removed records, each tagged with why it was removed."""
    by_id = {f.record_id: f for f in findings}
    return [{**r.raw, REMOVED_FIELD: removal_reason(by_id[r.id])} for r in removed]


# -- benchmark runs --------------------------------------------------------------


@dataclass
class BenchResult:
    rows: list[dict]
    report: ClassificationReport | None
    skipped: list[dict]
    abstained: int

    def metrics(self) -> dict:
        return {
            "report": self.report.to_dict() if self.report else None,
            "n_records": len(self.rows),
            "n_scored": self.report.total if self.report else 0,
            "abstained": self.abstained,
            "skipped": self.skipped,
        }


def _bench_row(pipeline, record: DatasetRecord, mode: str, adapter: Adapter, binary_map: str) -> dict:
    row: dict[str, Any] = {"id": record.id, "gold": adapter.display(record.gold_label)}
    try:
        result = pipeline.verify(record.input, mode, record.evidence_text if mode.startswith("dataset") else None)
    except CAAFCError as exc:
        row.update(label=None, predicted=None, error=f"{type(exc).__name__}: {exc}")
        return row
    label = result.final.label
    mapped = binary_label(label, binary_map) if adapter.binary else label
    row.update(label=label.value, predicted=adapter.display(mapped) if mapped is not None else None, error=None)
    return row


def run_benchmark(
    pipeline,
    records: Sequence[DatasetRecord],
    adapter_id: str,
    mode: str = "dataset",
    binary_map: str = "false",
    parallel: int = 1,
    checkpoint: str | Path | None = None,
    resume: bool = False,
    on_row: Callable[[dict], None] | None = None,
) -> BenchResult:
    """Verify every record and score predictions against gold labels.

    With ``checkpoint`` each finished record is appended to a JSONL file; with
    ``resume`` records already present there are not re-run.
    """
    adapter = get_adapter(adapter_id)
    if binary_map not in ("false", "abstain"):
        raise InvalidInput("binary_map must be 'false' or 'abstain'")
    done: dict[str, dict] = {}
    ckpt = Path(checkpoint) if checkpoint else None
    if ckpt is not None and resume and ckpt.is_file():
        for line in ckpt.read_text("utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                done[row["id"]] = row
    elif ckpt is not None and ckpt.exists():
        ckpt.unlink()
    todo = [r for r in records if r.id not in done]
    sink = threading.Lock()

    def work(record: DatasetRecord) -> dict:
        row = _bench_row(pipeline, record, mode, adapter, binary_map)
        with sink:
            if ckpt is not None:
                with open(ckpt, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
            if on_row is not None:
                on_row(row)
        return row

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        for row in pool.map(work, todo):
            done[row["id"]] = row
    rows = [done[r.id] for r in records]
    skipped = [{"record_id": r["id"], "error": r["error"]} for r in rows if r.get("error")]
    scored = [r for r in rows if not r.get("error") and r["predicted"] is not None]
    abstained = sum(1 for r in rows if not r.get("error") and r["predicted"] is None)
    report = None
    if scored:
        report = classification_report([r["gold"] for r in scored], [r["predicted"] for r in scored], adapter.classes())
    return BenchResult(rows, report, skipped, abstained)
