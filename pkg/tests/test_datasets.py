import json

import pytest

from caafc.datasets import (
    REMOVED_FIELD,
    MismatchFinding,
    clean,
    compare_evidence,
    detect_mismatches,
    label_counts,
    load_dataset,
    majority_vote,
    record_from_row,
    removed_rows,
    run_benchmark,
)
from caafc.errors import InvalidInput, ParseError, UnknownRawLabel
from caafc.gateway import Gateway
from caafc.pipeline import Pipeline
from caafc.verdict import VerdictLabel
from conftest import scripted, verdicts_json

T, F, U = VerdictLabel.TRUE, VerdictLabel.FALSE, VerdictLabel.UNVERIFIABLE
TRIO = ["m1", "m2", "m3"]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_averitec_labels_and_dates(tmp_path):
    rows = [
        {"claim_id": 1, "claim": "a", "label": "Supported", "claim_date": "25-8-2020",
         "questions": [], "evidence": [{"question": "Q?", "answers": [{"answer": "A."}]}]},
        {"claim_id": 2, "claim": "b", "label": "Conflicting Evidence/Cherrypicking"},
        {"claim_id": 3, "claim": "c", "label": "Not Enough Evidence"},
        {"claim_id": 4, "claim": "d", "label": "Refuted"},
    ]
    recs = load_dataset(write_jsonl(tmp_path / "a.jsonl", rows), "averitec")
    assert [r.gold_label for r in recs] == [T, U, U, F]
    assert recs[0].input.claim_date.isoformat() == "2020-08-25"
    assert recs[0].evidence_text == "Q? A."
    assert recs[0].input.metadata["evidence"] == "Q? A."


def test_factors_merge():
    labels = ["true", "false", "misleading", "partially true", "unverifiable"]
    recs = [record_from_row({"id": i, "claim": "x", "label": l}, "factors") for i, l in enumerate(labels)]
    assert label_counts(recs) == {"true": 1, "false": 3, "unverifiable": 1}


def test_unknown_label_and_parse_error(tmp_path):
    with pytest.raises(UnknownRawLabel) as info:
        record_from_row({"id": "r9", "claim": "x", "label": "maybe"}, "claim_generic")
    assert "r9" in str(info.value) and "maybe" in str(info.value)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1, "claim": "x", "label": "true"}\n{oops\n')
    with pytest.raises(ParseError) as info:
        load_dataset(bad, "claim_generic")
    assert info.value.line == 2
    with pytest.raises(InvalidInput):
        load_dataset(bad, "nope")


def test_json_array_and_dialogue_turns(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps([{"id": "d1", "label": "hallucination", "knowledge": "k",
                                 "dialogue": [{"speaker": "A", "text": "hi"}, {"speaker": "B", "text": "yo"}]}]))
    (rec,) = load_dataset(path, "dialogue_generic")
    assert rec.input.kind == "dialogue" and rec.input.text == "[A1]: hi\n[B1]: yo"
    assert rec.gold_label is F and rec.evidence_text == "k"


def test_majority_vote_all_triples():
    from itertools import product

    for votes in product(["evidence_1", "evidence_2", "tie"], repeat=3):
        expected = next((c for c in set(votes) if votes.count(c) >= 2), "unresolved")
        assert majority_vote(votes) == expected


def _comparison_gateway(choices):
    gw = Gateway()
    for model, choice in zip(TRIO, choices):
        scripted(model, gateway=gw, compare={"better_evidence": choice, "reason_category": "more_updated_information",
                                             "reason": "newer"})
    return gw


def test_compare_evidence():
    winner, votes = compare_evidence(_comparison_gateway(["evidence_2", "evidence_2", "evidence_1"]),
                                     "claim", "old", "new", TRIO)
    assert winner == "evidence_2" and [v.model_id for v in votes] == TRIO
    with pytest.raises(InvalidInput):
        compare_evidence(_comparison_gateway(["tie"] * 3), "c", "a", "b", TRIO[:2])


def test_compare_evidence_records_failures():
    gw = _comparison_gateway(["evidence_1", "evidence_1", "tie"])
    scripted("m3", gateway=gw, compare="garbage")
    failures = []
    winner, votes = compare_evidence(gw, "c", "a", "b", TRIO, failures=failures, repair_budget=0)
    assert winner == "evidence_1" and len(votes) == 2 and failures[0]["model_id"] == "m3"


def mismatch_pipeline(predictions):
    """predictions: record text -> per-model labels."""
    gw = Gateway()
    for i, model in enumerate(TRIO):
        def fact_check(request, i=i):
            claim = next(c for c in predictions if c in request.user_text)
            return verdicts_json((claim, predictions[claim][i]))

        scripted(model, gateway=gw, segment=lambda r: json.dumps([next(c for c in predictions if c in r.user_text)]),
                 fact_check=fact_check)
    return Pipeline(gw, {"default": "m1"})


def test_detect_mismatches_and_clean():
    preds = {"c1": ["false"] * 3, "c2": ["true"] * 3, "c3": ["false", "true", "false"], "c4": ["unverifiable"] * 3}
    golds = {"c1": "true", "c2": "true", "c3": "true", "c4": "false"}
    records = [record_from_row({"id": c, "claim": c, "label": golds[c], "evidence": "ev"}, "claim_generic") for c in preds]
    records.append(record_from_row({"id": "c5", "claim": "c5", "label": "true"}, "claim_generic"))
    skips = []
    findings = detect_mismatches(mismatch_pipeline(preds), records, TRIO, skip_log=skips)
    assert {f.record_id for f in findings if f.flagged} == {"c1", "c4"}
    assert [s["record_id"] for s in skips] == ["c5"]
    kept, removed = clean(records, findings)
    assert {r.id for r in removed} == {"c1", "c4"}
    assert {r.id for r in kept} | {r.id for r in removed} == {r.id for r in records}
    rows = removed_rows(removed, findings)
    assert all("unanimously" in row[REMOVED_FIELD] for row in rows)


def test_mismatch_finding_invariants():
    with pytest.raises(InvalidInput):
        MismatchFinding("x", {"a": T}, T)
    f = MismatchFinding("x", {"a": F, "b": F, "c": T}, T)
    assert f.consensus is None and not f.flagged


def test_run_benchmark_with_checkpoint_resume(tmp_path):
    preds = {"r1": ["true"] * 3, "r2": ["false"] * 3, "r3": ["unverifiable"] * 3}
    records = [record_from_row({"id": c, "claim": c, "label": "true", "evidence": "ev"}, "coverbench") for c in preds]
    ckpt = tmp_path / "ck.jsonl"
    seen = []
    res = run_benchmark(mismatch_pipeline(preds), records, "coverbench", checkpoint=ckpt, on_row=seen.append)
    assert [r["predicted"] for r in res.rows] == ["true", "false", "false"]
    assert res.report.accuracy == pytest.approx(1 / 3) and len(seen) == 3
    abstain = run_benchmark(mismatch_pipeline(preds), records, "coverbench", binary_map="abstain")
    assert abstain.abstained == 1 and abstain.report.total == 2
    # resume re-runs nothing
    calls = []
    res2 = run_benchmark(mismatch_pipeline(preds), records, "coverbench", checkpoint=ckpt, resume=True,
                         on_row=calls.append)
    assert calls == [] and res2.metrics() == res.metrics()
