import datetime as dt
import json

import httpx
import pytest

from caafc.actionability import (
    ActionabilityScore,
    LinkProbeResult,
    LinkProber,
    ReplayProber,
    RevisionFeedback,
    link_level,
    score,
    score_histogram,
    static_transport,
    synthesize_feedback,
    write_histogram_csv,
)
from caafc.errors import InvalidInput, InvariantViolation
from caafc.justification import Justification
from caafc.verdict import SubclaimVerdict
from conftest import judge, scripted

DAY = dt.date(2025, 3, 1)


def probe(url, ok=True):
    return LinkProbeResult(url, ok, 200 if ok else 404)


def test_score_total_and_pass():
    assert ActionabilityScore(1, 1, 1).total == 3 and not ActionabilityScore(1, 1, 1).passed
    assert ActionabilityScore(2, 2, 0).passed
    assert ActionabilityScore(0, 0, 3, threshold=3).passed
    assert ActionabilityScore(2, 1, 3).to_dict() == {
        "error_detection": 2, "error_correction": 1, "link_score": 3, "total": 6, "pass": True}


@pytest.mark.parametrize("bad", [(3, 0, 0), (0, -1, 0), (0, 0, 4), (1.5, 0, 0), (True, 0, 0)])
def test_score_ranges(bad):
    with pytest.raises(InvalidInput):
        ActionabilityScore(*bad)


def test_link_score_needs_working_link():
    with pytest.raises(InvalidInput):
        ActionabilityScore(0, 0, 1, functional_links=0)
    ActionabilityScore(0, 0, 0, functional_links=0)


def test_link_level():
    a, b = "https://a.example", "https://b.example"
    assert link_level([], [], True, True) == 0
    assert link_level([a], [probe(a, False)], True, True) == 0
    assert link_level([a], [probe(a)], False, False) == 1
    assert link_level([a], [probe(a)], True, False) == 2
    assert link_level([a], [probe(a)], True, True) == 3
    assert link_level([a, b], [probe(a), probe(b, False)], True, True) == 2
    assert link_level([a, b], [probe(a)], True, True) == 2  # unprobed counts as broken


def test_score_uses_judge_and_probes():
    gw, script = scripted(judge=judge(2, 1, True, True))
    j = Justification("Paris is in France, see https://a.example", cited_urls=("https://a.example",))
    v = [SubclaimVerdict("Paris is the capital of Germany.", "false", "no")]
    s = score(gw, "claim", j, v, [probe("https://a.example")], "m")
    assert (s.error_detection, s.error_correction, s.link_score, s.total, s.passed) == (2, 1, 3, 6, True)
    prompt = script.requests[0].user_text
    assert "- Paris is the capital of Germany." in prompt and "https://a.example" in prompt
    assert script.requests[0].tags[0] == "judge"


def test_score_links_default_to_zero_without_probes():
    gw, _ = scripted(judge=judge(2, 2, True, True))
    j = Justification("see https://a.example", cited_urls=("https://a.example",))
    assert score(gw, "c", j, [], [], "m").link_score == 0


def test_feedback_fields_follow_deficits():
    fb = synthesize_feedback(ActionabilityScore(1, 2, 3))
    assert fb.missing_errors and not fb.missing_corrections and not fb.link_issues
    fb = synthesize_feedback(ActionabilityScore(1, 2, 3), {"error_detection": "You missed the capital."})
    assert fb.missing_errors == "You missed the capital."
    fb = synthesize_feedback(ActionabilityScore(1, 2, 3))
    assert fb.render().startswith("Unmentioned errors:")
    fb = synthesize_feedback(ActionabilityScore(2, 2, 0))
    assert fb.link_issues and "Source links:" in fb.render()


def test_feedback_on_perfect_score_is_an_error():
    with pytest.raises(InvariantViolation):
        synthesize_feedback(ActionabilityScore(2, 2, 3))


def test_feedback_for_passing_but_imperfect_score():
    fb = synthesize_feedback(ActionabilityScore(1, 2, 3))
    assert not fb.is_empty()
    assert RevisionFeedback().is_empty()


def test_prober_statuses():
    statuses = {"https://ok.example/": 200, "https://gone.example/": 404, "https://slow.example/": "timeout",
                "https://err.example/": 500}
    prober = LinkProber(transport=static_transport(statuses), today=lambda: DAY)
    results = {r.url: r for r in prober.probe_links(statuses)}
    assert results["https://ok.example/"].functional
    assert not results["https://gone.example/"].functional
    assert results["https://slow.example/"].status == "timeout" and not results["https://slow.example/"].functional
    assert not results["https://err.example/"].functional


def test_prober_redirects_and_head_fallback():
    def handler(request):
        url = str(request.url)
        if url == "https://hop.example/0":
            return httpx.Response(301, headers={"location": "https://hop.example/1"})
        if url.startswith("https://loop.example/"):
            n = int(url.rsplit("/", 1)[1])
            return httpx.Response(302, headers={"location": f"https://loop.example/{n + 1}"})
        if url == "https://nohead.example/":
            return httpx.Response(405 if request.method == "HEAD" else 200)
        return httpx.Response(200)

    prober = LinkProber(transport=httpx.MockTransport(handler), max_redirects=5, today=lambda: DAY)
    hop, loop, nohead = prober.probe_links(["https://hop.example/0", "https://loop.example/0", "https://nohead.example/"])
    assert hop.functional
    assert loop.status == "too_many_redirects" and not loop.functional
    assert nohead.functional


def test_prober_daily_cache(tmp_path):
    calls = []

    def handler(request):
        calls.append(str(request.url))
        return httpx.Response(200)

    days = [DAY]
    prober = LinkProber(transport=httpx.MockTransport(handler), cache_dir=tmp_path, today=lambda: days[0])
    prober.probe_links(["https://a.example/", "https://a.example/"])
    prober.probe_links(["https://a.example/"])
    assert len(calls) == 1
    assert (tmp_path / f"probes-{DAY.isoformat()}.json").is_file()
    fresh = LinkProber(transport=httpx.MockTransport(handler), cache_dir=tmp_path, today=lambda: DAY)
    fresh.probe_links(["https://a.example/"])
    assert len(calls) == 1
    days[0] = DAY + dt.timedelta(days=1)
    prober.probe_links(["https://a.example/"])
    assert len(calls) == 2


def test_replay_prober(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(json.dumps({"kind": "probe", "results": [probe("https://a.example").to_dict()]}) + "\n")
    rp = ReplayProber.from_transcript(path)
    a, b = rp.probe_links(["https://a.example", "https://b.example"])
    assert a.functional and not b.functional


def test_histogram(tmp_path):
    rows = score_histogram([0, 7, 7, 3])
    assert len(rows) == 8 and dict(rows)[7] == 0.5 and sum(d for _, d in rows) == pytest.approx(1.0)
    with pytest.raises(InvalidInput):
        score_histogram([])
    with pytest.raises(InvalidInput):
        score_histogram([8])
    write_histogram_csv(tmp_path / "h.csv", [4, 4])
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin,density" and lines[5] == "4,1.0"
