import pytest

from caafc.errors import NoJsonFound, SchemaViolation
from caafc.structured import extract_json, validate


def test_fenced_json_is_extracted():
    raw = 'Sure!\n```json\n{"justification": "ok"}\n```\nbye'
    assert extract_json(raw, "justification_object") == {"justification": "ok"}


def test_json_embedded_in_prose():
    raw = 'The answer is {"better_evidence": "Evidence_2", "reason_category": "more context", "reason": "r"} thanks'
    value = extract_json(raw, "comparison_object")
    assert value["better_evidence"] == "evidence_2"
    assert value["reason_category"] == "more_context"


def test_verdict_aliases_and_label_case():
    raw = '{"Subclaims": [{"subclaim": "A", "label": "False.", "explanation": "e"}]}'
    value = extract_json(raw, "verdict_object")
    assert value["subclaims"] == [{"text": "A", "label": "false", "justification": "e"}]


def test_subclaim_list_accepts_array_or_object():
    assert extract_json('["a", "b"]', "subclaim_list") == ["a", "b"]
    assert extract_json('{"sub_claims": ["a"]}', "subclaim_list") == {"subclaims": ["a"]}


def test_no_json():
    with pytest.raises(NoJsonFound):
        extract_json("no structure here", "any")


def test_schema_violation_on_bad_label():
    with pytest.raises(SchemaViolation):
        extract_json('{"subclaims": [{"text": "a", "label": "maybe", "justification": "j"}]}', "verdict_object")


def test_first_valid_candidate_wins():
    raw = '{"foo": 1} then {"justification": "second"}'
    assert extract_json(raw, "justification_object") == {"justification": "second"}


def test_validate_judge_ranges():
    ok = {"error_detection": 2, "error_correction": 0, "links_relevant": True, "links_supportive": False}
    assert validate(ok, "judge_object") == ok
    with pytest.raises(SchemaViolation):
        validate({**ok, "error_detection": 3}, "judge_object")
