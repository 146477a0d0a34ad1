import itertools

import pytest

from caafc.errors import EmptyInput, InvalidInput, InvariantViolation, VerdictCountMismatch
from caafc.retrieval import bundle_from_text
from caafc.segmenter import AtomicClaim
from caafc.verdict import (
    FinalVerdict,
    SubclaimVerdict,
    VerdictLabel,
    aggregate,
    binary_label,
    check_subclaims,
    hallucination_label,
)
from conftest import scripted, verdicts_json

T, F, U = VerdictLabel.TRUE, VerdictLabel.FALSE, VerdictLabel.UNVERIFIABLE
EVIDENCE = bundle_from_text("Paris is the capital of France. The Eiffel Tower is located in Paris.")


def atoms(*texts):
    return [AtomicClaim(i, t) for i, t in enumerate(texts)]


def test_aggregate_examples():
    assert aggregate([F, T]) is F
    assert aggregate([T, U, T]) is U
    assert aggregate([U, F]) is F
    assert aggregate(["true", "true"]) is T
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_is_permutation_invariant():
    for seq in itertools.product([T, F, U], repeat=3):
        assert len({aggregate(p) for p in itertools.permutations(seq)}) == 1


def test_final_verdict_invariant():
    v = [SubclaimVerdict("a", F, "j"), SubclaimVerdict("b", T, "j")]
    assert FinalVerdict.from_subclaims(v).label is F
    with pytest.raises(InvariantViolation):
        FinalVerdict(T, v)
    with pytest.raises(InvalidInput):
        SubclaimVerdict("a", T, " ")


def test_label_mappings():
    assert hallucination_label(T) == "factual"
    assert hallucination_label(F) == "hallucination"
    assert hallucination_label(U) == "hallucination"
    assert hallucination_label(U, "abstain") is None
    assert binary_label(U) is F and binary_label(U, "abstain") is None and binary_label(T) is T


def test_check_subclaims_paris():
    gw, _ = scripted(fact_check=verdicts_json(("Paris is the capital of Germany.", "false"),
                                              ("Paris has the Eiffel Tower.", "true")))
    out = check_subclaims(gw, atoms("Paris is the capital of Germany.", "Paris has the Eiffel Tower."), EVIDENCE, "m")
    assert [v.label for v in out] == [F, T]
    assert FinalVerdict.from_subclaims(out).label is F


def test_entries_matched_by_text_not_position():
    gw, _ = scripted(fact_check=verdicts_json(("b", "false"), ("A.", "true")))
    out = check_subclaims(gw, atoms("a", "b"), EVIDENCE, "m")
    assert [(v.subclaim_text, v.label) for v in out] == [("a", T), ("b", F)]


def test_count_mismatch_reprompts_once_then_fails():
    gw, script = scripted(fact_check=[verdicts_json(("a", "true")), verdicts_json(("a", "true"), ("b", "false"))])
    out = check_subclaims(gw, atoms("a", "b"), EVIDENCE, "m")
    assert len(out) == 2 and script.calls["fact_check"] == 2
    assert "Sub-claims without a verdict" in script.requests[1].user_text

    gw, script = scripted(fact_check=verdicts_json(("a", "true")))
    with pytest.raises(VerdictCountMismatch):
        check_subclaims(gw, atoms("a", "b"), EVIDENCE, "m")
    assert script.calls["fact_check"] == 2


def test_prompt_carries_only_narrative_and_claims():
    gw, script = scripted(fact_check=verdicts_json(("a", "true")))
    check_subclaims(gw, atoms("a"), EVIDENCE, "m")
    text = script.requests[0].user_text
    assert EVIDENCE.narrative in text and '["a"]' in text


from hypothesis import given
from hypothesis import strategies as st

labels = st.lists(st.sampled_from(list(VerdictLabel)), min_size=1, max_size=8)


@given(labels, labels)
def test_aggregate_of_concatenation(a, b):
    assert aggregate(a + b) is aggregate([aggregate(a), aggregate(b)])
