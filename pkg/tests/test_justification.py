import pytest

from caafc.actionability import ActionabilityScore, LinkProber, RevisionFeedback, static_transport
from caafc.errors import InvalidInput
from caafc.gateway import Transcript, read_transcript
from caafc.justification import Justification, cited_urls, corrected_from_text, justify, refine_loop, revise
from caafc.retrieval import bundle_from_text
from caafc.verdict import FinalVerdict, SubclaimVerdict
from conftest import judge, scripted

PARIS = "Paris is the capital of Germany and it has the Eiffel Tower."
CORRECTED = "Paris is the capital of France and it has the Eiffel Tower."
PARIS_TEXT = (
    "the claim has a factual error in the part where it says that Paris is the capital of Germany as Paris is in "
    f"France. The corrected version of this claim is '{CORRECTED}'"
)
BUNDLE = bundle_from_text("Paris is the capital of France. SOURCE: https://www.britannica.com/place/Paris")
FALSE_V = [SubclaimVerdict("Paris is the capital of Germany.", "false", "France."),
           SubclaimVerdict("Paris has the Eiffel Tower.", "true", "yes")]
TRUE_V = [SubclaimVerdict("Paris has the Eiffel Tower.", "true", "yes")]


def test_corrected_from_text():
    assert corrected_from_text(PARIS_TEXT) == CORRECTED
    biden = ("Income fell in 2020. The corrected claim would be: \"Joe and Jill Biden's income increased in 2023 "
             "after a decrease in 2020.\"")
    assert corrected_from_text(biden) == "Joe and Jill Biden's income increased in 2023 after a decrease in 2020."
    assert corrected_from_text("no correction here") is None


def test_cited_urls_from_text_and_hosts():
    text = "See https://x.example/a. Also Britannica confirms; britannica.com agrees."
    assert cited_urls(text, BUNDLE) == ("https://x.example/a", "https://www.britannica.com/place/Paris")
    assert cited_urls("nothing", BUNDLE) == ()


def test_justify_extracts_corrected_claim():
    gw, script = scripted(justify={"justification": PARIS_TEXT})
    j = justify(gw, PARIS, BUNDLE, FALSE_V, "m")
    assert j.corrected_claim == CORRECTED and j.revision == 0
    assert '"label": "false"' in script.requests[0].user_text


def test_justify_true_claim_corrected_is_claim():
    gw, _ = scripted(justify={"justification": "All parts hold."})
    assert justify(gw, "Paris has the Eiffel Tower.", BUNDLE, TRUE_V, "m").corrected_claim == "Paris has the Eiffel Tower."


def test_justification_roundtrip():
    j = Justification("t", "c", ("https://a",), 2)
    assert Justification.from_dict(j.to_dict()) == j
    with pytest.raises(InvalidInput):
        Justification("  ")


def test_revise_accepts_json_or_plain_text():
    base = Justification("old", cited_urls=("https://a.example",))
    fb = RevisionFeedback(missing_errors="mention the capital")
    gw, script = scripted(revise=["plain revised text https://b.example", {"justification": "json revised"}])
    r1 = revise(gw, base, fb, "m")
    assert r1.text == "plain revised text https://b.example" and r1.revision == 1
    assert r1.cited_urls == ("https://a.example", "https://b.example")
    assert "Unmentioned errors: mention the capital" in script.requests[0].user_text
    assert revise(gw, r1, fb, "m").text == "json revised"
    with pytest.raises(InvalidInput):
        revise(gw, base, RevisionFeedback(), "m")


def _loop(gateway, verdicts, max_iterations=3, **kw):
    return refine_loop(gateway, PARIS, BUNDLE, verdicts, FinalVerdict.from_subclaims(verdicts), max_iterations,
                       justifier_model="m", **kw)


def test_loop_no_revision_when_first_score_passes():
    gw, script = scripted(justify={"justification": PARIS_TEXT}, judge=judge(2, 2), revise="x")
    out = _loop(gw, FALSE_V)
    assert out.revisions == 0 and script.calls["revise"] == 0 and script.calls["judge"] == 1
    assert out.score.total == 4 and not out.below_threshold


def test_loop_stops_after_max_revisions():
    gw, script = scripted(justify={"justification": "weak"}, judge=judge(1, 0, False, False), revise="still weak")
    out = _loop(gw, FALSE_V, max_iterations=3)
    assert out.revisions == 3 and script.calls["revise"] == 3 and script.calls["judge"] == 4
    assert out.below_threshold and len(out.history) == 4


def test_loop_keeps_best_scoring_justification():
    gw, script = scripted(justify={"justification": "v0"}, judge=[judge(1, 1), judge(2, 1), judge(0, 0)],
                          revise=["v1", "v2"])
    out = _loop(gw, FALSE_V, max_iterations=2)
    assert out.justification.text == "v1" and out.score.total == 3 and out.below_threshold


def test_loop_true_verdict_bypasses_gate():
    gw, script = scripted(justify={"justification": "All true."}, judge=judge(0, 0))
    out = _loop(gw, TRUE_V)
    assert script.calls["revise"] == 0 and script.calls["judge"] == 1
    assert out.revisions == 0 and not out.below_threshold


def test_loop_revises_until_pass_and_logs(tmp_path):
    path = tmp_path / "t.jsonl"
    gw, _ = scripted(justify={"justification": "v0"}, judge=[judge(1, 1), judge(2, 2, True, True)],
                     revise=f"{PARIS_TEXT} https://www.britannica.com/place/Paris")
    gw.transcript = Transcript(path)
    prober = LinkProber(transport=static_transport({"https://www.britannica.com/place/Paris": 200}))
    out = _loop(gw, FALSE_V, prober=prober)
    assert out.revisions == 1 and out.score.total == 7
    assert out.justification.corrected_claim == CORRECTED
    kinds = [r["kind"] for r in read_transcript(path)]
    assert "probe" in kinds and kinds[-1] == "refine"


def test_separate_judge_and_revisory_models():
    gw, a = scripted("writer", justify={"justification": "v0"}, revise="v1")
    gw, b = scripted("judge", gateway=gw, judge=[judge(0, 0), judge(2, 2)])
    refine_loop(gw, PARIS, BUNDLE, FALSE_V, FinalVerdict.from_subclaims(FALSE_V), justifier_model="writer",
                judge_model="judge")
    assert a.calls == {"justify": 1, "revise": 1} and b.calls == {"judge": 2}
