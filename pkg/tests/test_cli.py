import json

import pytest

from caafc.cli import main
from conftest import FIXTURES

CLAIMS = FIXTURES / "claims"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_exit_codes(capsys, monkeypatch):
    monkeypatch.delenv("CAAFC_CONFIG", raising=False)
    cfg = ("--config", CLAIMS / "config.json")
    assert run(capsys, "verify", CLAIMS / "paris.txt", *cfg)[0] == 1
    assert run(capsys, "verify", CLAIMS / "tower.txt", *cfg)[0] == 0
    assert run(capsys, "verify", CLAIMS / "mexico.txt", *cfg)[0] == 2
    assert run(capsys, "verify", CLAIMS / "paris.txt")[0] == 10
    assert run(capsys, "verify", *cfg)[0] == 12
    assert run(capsys, "verify", "--text", "Unheard-of claim.", *cfg)[0] == 3


def test_verify_config_from_env(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("CAAFC_CONFIG", str(CLAIMS / "config.json"))
    code, out, _ = run(capsys, "verify", CLAIMS / "dialogue.json", "--mode", "dataset",
                       "--manifest", tmp_path / "m.json")
    report = json.loads(out)
    assert code == 1 and report["hallucination_label"] == "hallucination"
    assert report["manifest_id"] == json.loads((tmp_path / "m.json").read_text())["manifest_id"]


def test_bench_and_replay(capsys, tmp_path):
    cfg = ("--config", FIXTURES / "bench" / "config.json")
    code, out, _ = run(capsys, "bench", FIXTURES / "bench" / "dataset.jsonl", "--adapter", "claim_generic",
                       "--out", tmp_path / "live", *cfg)
    assert code == 0
    live = (tmp_path / "live" / "metrics.json").read_text()
    assert {p.name for p in (tmp_path / "live").iterdir()} >= {"records.jsonl", "transcript.jsonl", "manifest.json",
                                                               "metrics.json", "report.txt"}
    code, _, _ = run(capsys, "bench", FIXTURES / "bench" / "dataset.jsonl", "--adapter", "claim_generic",
                     "--out", tmp_path / "replay", "--replay", tmp_path / "live" / "transcript.jsonl", *cfg)
    assert code == 0 and (tmp_path / "replay" / "metrics.json").read_text() == live


def test_clean_with_compare(capsys, tmp_path):
    code, out, _ = run(capsys, "clean", FIXTURES / "clean" / "dataset.jsonl", "--adapter", "claim_generic",
                       "--trio", "gemma-fixture,llama-fixture,qwen-fixture", "--out", tmp_path, "--compare",
                       "--config", FIXTURES / "clean" / "config.json")
    summary = json.loads(out)
    assert code == 0 and summary["removed_ids"] == ["c02", "c07"] and summary["kept"] == 8
    findings = [json.loads(l) for l in (tmp_path / "findings.jsonl").read_text().splitlines()]
    assert {f["record_id"] for f in findings if f.get("comparison_winner")} == {"c02", "c07"}
    removed = [json.loads(l) for l in (tmp_path / "removed.jsonl").read_text().splitlines()]
    assert all("caafc_removed_reason" in r for r in removed)


def test_clean_needs_three_models(capsys, tmp_path):
    code, _, _ = run(capsys, "clean", FIXTURES / "clean" / "dataset.jsonl", "--adapter", "claim_generic",
                     "--trio", "a,b", "--out", tmp_path, "--config", FIXTURES / "clean" / "config.json")
    assert code == 10


def test_score_and_histogram(capsys, tmp_path):
    code, out, _ = run(capsys, "score", "--justification", CLAIMS / "paris_justification.json",
                       "--claim", CLAIMS / "paris.txt", "--verdicts", CLAIMS / "paris_verdicts.json",
                       "--config", CLAIMS / "config.json")
    scored = json.loads(out)
    assert code == 0 and scored["total"] == 7 and scored["pass"]
    (tmp_path / "a.json").write_text(json.dumps(scored))
    (tmp_path / "b.json").write_text(json.dumps({"error_detection": 0, "error_correction": 0, "link_score": 1}))
    code, out, _ = run(capsys, "score", "--histogram", tmp_path)
    lines = out.splitlines()
    assert lines[0] == "bin,density" and lines[2] == "1,0.5" and lines[8] == "7,0.5"


def test_compare_command(capsys):
    code, out, _ = run(capsys, "compare", "--claim", "Record c02 states a checkable fact.",
                       "--evidence1", "[evidence c02] Dataset evidence for c02.",
                       "--evidence2", "Updated reporting for c02.",
                       "--trio", "gemma-fixture,llama-fixture,qwen-fixture",
                       "--config", FIXTURES / "clean" / "config.json")
    assert code == 0 and json.loads(out)["winner"] == "evidence_2"


def test_bad_dataset_line(capsys, tmp_path):
    bad = tmp_path / "d.jsonl"
    bad.write_text('{"id": 1, "claim": "x", "label": "maybe"}\n')
    code, _, err = run(capsys, "bench", bad, "--adapter", "claim_generic", "--out", tmp_path / "o",
                       "--config", FIXTURES / "bench" / "config.json")
    assert code == 12 and "maybe" in err
