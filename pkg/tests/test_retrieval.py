import datetime as dt

import pytest

from caafc.errors import EmptyNarrative, RetrievalUnavailable
from caafc.gateway import Transcript, read_transcript
from caafc.retrieval import (
    EvidenceBundle,
    EvidenceItem,
    EvidenceRetriever,
    FixtureRetrievalBackend,
    PrimarySource,
    ReplayRetrievalBackend,
    build_query,
    bundle_from_text,
    canonicalize,
    extract_items,
    select_primary_sources,
)
from conftest import scripted

LATIMES = "https://www.latimes.com/science/story/2021-07-27/timeline-cdc-mask-guidance-during-covid-19-pandemic"


def test_build_query_with_sources():
    q = build_query(["Joe Biden tweeted X."], dt.date(2023, 4, 1), [PrimarySource("Joe Biden's official Twitter account")])
    assert q == (
        'I need timestamped information about the following list of claims ["Joe Biden tweeted X."] '
        "on the following date 2023-04-01. Start by checking the following sources: Joe Biden's official Twitter account"
    )


def test_build_query_without_sources_or_date():
    q = build_query(["a", "b"], None)
    assert q.endswith('claims ["a", "b"] on the following date unknown.')
    assert "Start by checking" not in q


def test_select_primary_sources_keeps_order():
    gw, _ = scripted(primary_sources={"sources": [{"source": "CDC", "justification": "issues guidance"}, "WHO"]})
    sources = select_primary_sources(gw, "The CDC dropped masks.", "m")
    assert [s.descriptor for s in sources] == ["CDC", "WHO"]
    assert sources[0].rationale == "issues guidance"


def test_select_primary_sources_empty_is_legal():
    gw, _ = scripted(primary_sources="[]")
    assert select_primary_sources(gw, "c", "m") == []


def test_source_marker_extraction_dates_from_url():
    narrative = f'"The CDC relaxed its guidance in May 2021." SOURCE: {LATIMES}'
    items = extract_items(narrative)
    assert len(items) == 1
    assert items[0].source_url == LATIMES
    assert items[0].source_date == dt.date(2021, 7, 27)
    assert items[0].excerpt == "The CDC relaxed its guidance in May 2021."


def test_bare_urls_and_prose_dates():
    narrative = "On March 3, 2020 see https://a.example/x.\nUndated https://b.example/y\nagain https://a.example/x"
    items = extract_items(narrative)
    assert [i.source_url for i in items] == ["https://a.example/x", "https://b.example/y"]
    assert items[0].source_date == dt.date(2020, 3, 3)
    assert items[1].source_date is None


def test_canonicalize_orders_dated_then_undated():
    items = (
        EvidenceItem("u1", "https://u/1"),
        EvidenceItem("late", "https://l", dt.date(2022, 1, 1)),
        EvidenceItem("early", "https://e", dt.date(2020, 1, 1)),
        EvidenceItem("u2", "https://u/2"),
    )
    out = canonicalize(EvidenceBundle("q", "n", items))
    assert [i.excerpt for i in out.items] == ["early", "late", "u1", "u2"]


def test_bundle_roundtrip():
    b = bundle_from_text(f"x SOURCE: {LATIMES}")
    assert EvidenceBundle.from_dict(b.to_dict()) == b
    with pytest.raises(EmptyNarrative):
        bundle_from_text("  ")


def test_retriever_caches_per_day(tmp_path):
    backend = FixtureRetrievalBackend(default="narrative https://x.example/a")
    day = dt.date(2025, 1, 1)
    transcript_path = tmp_path / "t.jsonl"
    r = EvidenceRetriever({"default": backend}, cache_dir=tmp_path / "c", transcript=Transcript(transcript_path),
                          today=lambda: day)
    first = r.retrieve("q", "default")
    second = r.retrieve("q", "default")
    assert backend.calls == 1 and first == second
    assert (tmp_path / "c" / f"{first.cache_key}.json").is_file()
    # a fresh retriever on the same directory and day reuses the disk cache
    r2 = EvidenceRetriever({"default": backend}, cache_dir=tmp_path / "c", today=lambda: day)
    r2.retrieve("q", "default")
    assert backend.calls == 1
    assert [rec["cached"] for rec in read_transcript(transcript_path)] == [False, True]


def test_retriever_errors():
    r = EvidenceRetriever({"empty": FixtureRetrievalBackend(default="  ")})
    with pytest.raises(RetrievalUnavailable):
        r.retrieve("q", "missing")
    with pytest.raises(EmptyNarrative):
        r.retrieve("q", "empty")
    with pytest.raises(RetrievalUnavailable):
        EvidenceRetriever({"d": FixtureRetrievalBackend()}).retrieve("q", "d")


def test_fixture_rules_and_replay(tmp_path):
    backend = FixtureRetrievalBackend(rules=[{"contains": ["Paris"], "narrative": "Paris is in France."}])
    assert backend.search('claims ["Paris"]') == "Paris is in France."
    path = tmp_path / "t.jsonl"
    EvidenceRetriever({"d": backend}, transcript=Transcript(path)).retrieve("about Paris", "d")
    replay = ReplayRetrievalBackend.from_transcript(path)
    assert replay.search("about Paris") == "Paris is in France."
    with pytest.raises(RetrievalUnavailable):
        replay.search("other")
