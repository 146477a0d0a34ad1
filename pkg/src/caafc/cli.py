"""``caafc`` command line: verify, bench, clean, score, compare.

Exit codes: ``verify`` returns 0/1/2 for true/false/unverifiable; every
command returns 3 when the pipeline fails and 10 or more for configuration
(10), I/O (11) and input parsing (12) problems.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .actionability import score as score_justification, write_histogram_csv
from .config import RunConfig, RunManifest, build_pipeline, file_hash, load_config, parse_model_overrides
from .datasets import (
    clean,
    compare_evidence,
    detect_mismatches,
    load_dataset,
    removal_reason,
    removed_rows,
    run_benchmark,
)
from .errors import CAAFCError, ConfigError, InvalidInput, ParseError, UnknownRawLabel
from .justification import Justification
from .segmenter import SPEAKER_TAG, ClaimInput
from .verdict import SubclaimVerdict, VerdictLabel

EXIT_BY_LABEL = {VerdictLabel.TRUE: 0, VerdictLabel.FALSE: 1, VerdictLabel.UNVERIFIABLE: 2}
EXIT_PIPELINE = 3
EXIT_CONFIG = 10
EXIT_IO = 11
EXIT_PARSE = 12

logger = logging.getLogger("caafc")


class InputError(Exception):
    """Bad user input file (exit 12)."""


# -- shared options ----------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config (default: $CAAFC_CONFIG)")
    p.add_argument("--models", action="append", default=[], metavar="STAGE=ID",
                   help="assign a model to a stage; repeatable; '*' sets the default")
    p.add_argument("--backend", help="retrieval backend id")
    p.add_argument("--parallel", type=int, help="record-level workers")
    p.add_argument("--threshold", type=int, help="actionability pass threshold (0-7)")
    p.add_argument("--max-revisions", type=int, help="revision passes when below threshold")
    p.add_argument("--binary-map", choices=("false", "abstain"), help="how unverifiable maps on binary benchmarks")
    p.add_argument("--replay", metavar="TRANSCRIPT", help="answer every model call from a transcript")
    p.add_argument("--transcript", help="append the run transcript to this JSONL file")
    p.add_argument("--cache-dir", help="evidence and link-probe cache directory")
    p.add_argument("--manifest", help="write the run manifest here")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args) -> RunConfig:
    path = args.config or os.environ.get("CAAFC_CONFIG")
    if not path:
        raise ConfigError("no config given (use --config or CAAFC_CONFIG)")
    config = load_config(path)
    overrides = {}
    models = dict(config.models)
    models.update(parse_model_overrides(args.models))
    overrides["models"] = models
    for attr, key in (("backend", "retrieval_backend"), ("parallel", "parallel"), ("threshold", "threshold"),
                      ("max_revisions", "max_revisions"), ("binary_map", "unverifiable_as"),
                      ("transcript", "transcript"), ("cache_dir", "cache_dir")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return RunConfig.from_dict({**config.to_dict(), **overrides})


def _read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _text_or_file(value: str) -> str:
    path = Path(value)
    if path.is_file():
        return path.read_text("utf-8").strip()
    return value


def _claim_input(args) -> tuple[ClaimInput, str | None]:
    if args.text is not None:
        kind = "dialogue" if len(SPEAKER_TAG.findall(args.text)) >= 2 else "claim"
        claim = ClaimInput(id=args.id or "claim", text=args.text, kind=kind, claim_date=args.date)
        evidence = None
    else:
        if not args.input:
            raise InputError("give a claim file or --text")
        path = Path(args.input)
        if path.suffix == ".json":
            data = _read_json(path)
            text = data.get("text") or data.get("claim") or data.get("dialogue")
            if not text:
                raise InputError(f"{path}: no 'text' field")
            kind = data.get("kind") or ("dialogue" if len(SPEAKER_TAG.findall(text)) >= 2 else "claim")
            claim = ClaimInput(id=str(data.get("id", path.stem)), text=text, kind=kind,
                               claim_date=args.date or data.get("claim_date"))
            evidence = data.get("evidence")
        else:
            text = path.read_text("utf-8").strip()
            kind = "dialogue" if len(SPEAKER_TAG.findall(text)) >= 2 else "claim"
            claim = ClaimInput(id=args.id or path.stem, text=text, kind=kind, claim_date=args.date)
            evidence = None
    if args.evidence:
        evidence = Path(args.evidence).read_text("utf-8")
    return claim, evidence


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _manifest(config: RunConfig, dataset: str | None = None) -> RunManifest:
    snapshot = config.to_dict()
    snapshot.pop("transcript", None)
    snapshot.pop("cache_dir", None)
    return RunManifest(snapshot, file_hash(dataset) if dataset else None).start()


# -- commands ----------------------------------------------------------------


def cmd_verify(args) -> int:
    config = _config(args)
    try:
        claim, evidence = _claim_input(args)
    except (InvalidInput, ValueError) as exc:
        raise InputError(str(exc)) from None
    pipeline = build_pipeline(config, replay=args.replay)
    manifest = _manifest(config)
    report = pipeline.run(claim, args.mode, evidence)
    report.manifest_id = manifest.manifest_id
    manifest.finish(pipeline.gateway.calls_by_stage)
    if args.manifest:
        manifest.write(args.manifest)
    sys.stdout.write(report.to_json() + "\n")
    return EXIT_BY_LABEL[report.result.final.label]


def cmd_bench(args) -> int:
    config = _config(args)
    records = load_dataset(args.dataset, args.adapter)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.replay is None and config.transcript is None:
        config = replace(config, transcript=str(out / "transcript.jsonl"))
    pipeline = build_pipeline(config, replay=args.replay)
    manifest = _manifest(config, args.dataset)
    result = run_benchmark(
        pipeline,
        records,
        args.adapter,
        mode=args.mode,
        binary_map=config.unverifiable_as,
        parallel=config.parallel,
        checkpoint=out / "records.jsonl",
        resume=args.resume,
    )
    manifest.finish(pipeline.gateway.calls_by_stage)
    manifest.write(args.manifest or out / "manifest.json")
    metrics = {"manifest_id": manifest.manifest_id, "adapter": args.adapter, "mode": args.mode,
               "binary_map": config.unverifiable_as, **result.metrics()}
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", "utf-8")
    if result.report is not None:
        (out / "report.txt").write_text(result.report.to_text(), "utf-8")
        sys.stderr.write(result.report.to_text())
    _emit(metrics)
    return 0


def _trio(value: str | None) -> list[str]:
    models = [m.strip() for m in (value or "").split(",") if m.strip()]
    if len(models) != 3:
        raise ConfigError("--trio needs exactly three comma-separated model ids")
    return models


def cmd_clean(args) -> int:
    config = _config(args)
    trio = _trio(args.trio)
    records = load_dataset(args.dataset, args.adapter)
    pipeline = build_pipeline(config, replay=args.replay, extra_models=trio)
    skips: list[dict] = []
    findings = detect_mismatches(pipeline, records, trio, skip_log=skips, parallel=config.parallel)
    if args.compare:
        by_id = {r.id: r for r in records}
        for finding in (f for f in findings if f.flagged):
            record = by_id[finding.record_id]
            other = record.raw.get("updated_evidence") or record.raw.get("alt_evidence")
            if not other:
                other = pipeline.retrieve_evidence(record.input).narrative
            failures: list[dict] = []
            winner, votes = compare_evidence(pipeline.gateway, record.input.text, record.evidence_text, other, trio,
                                             failures=failures, repair_budget=config.repair_budget)
            finding.comparison_winner, finding.comparison_votes = winner, votes
    kept, removed = clean(records, findings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "kept.jsonl", (r.raw for r in kept))
    _write_jsonl(out / "removed.jsonl", removed_rows(removed, findings))
    _write_jsonl(out / "findings.jsonl", (f.to_dict() for f in findings))
    summary = {
        "kept": len(kept),
        "removed": len(removed),
        "removed_ids": [r.id for r in removed],
        "reasons": {f.record_id: removal_reason(f) for f in findings if f.flagged},
        "skipped": skips,
    }
    _emit(summary)
    return 0


def _verdicts(path: str) -> list[SubclaimVerdict]:
    data = _read_json(path)
    items = data.get("subclaims", data.get("subclaim_verdicts")) if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise InputError(f"{path}: expected a list of subclaim verdicts")
    try:
        return [SubclaimVerdict.from_dict(item) for item in items]
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: bad verdict entry ({exc})") from None


def _justification(path: str) -> Justification:
    p = Path(path)
    if p.suffix == ".json":
        data = _read_json(p)
        try:
            return Justification.from_dict(data)
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: bad justification ({exc})") from None
    from .justification import cited_urls

    text = p.read_text("utf-8").strip()
    return Justification(text=text, cited_urls=cited_urls(text))


def _score_total(path: Path) -> int:
    data = _read_json(path)
    if "actionability" in data:
        data = data["actionability"]
    if "total" in data:
        return int(data["total"])
    return int(data["error_detection"]) + int(data["error_correction"]) + int(data["link_score"])


def cmd_score(args) -> int:
    if args.histogram:
        files = sorted(Path(args.histogram).glob("*.json"))
        if not files:
            raise InputError(f"no score files in {args.histogram}")
        totals = [_score_total(f) for f in files]
        target = args.out or "-"
        if target == "-":
            from .actionability import score_histogram

            sys.stdout.write("bin,density\n")
            for b, d in score_histogram(totals):
                sys.stdout.write(f"{b},{d}\n")
        else:
            write_histogram_csv(target, totals)
        return 0
    if not (args.justification and args.claim and args.verdicts):
        raise InputError("score needs --justification, --claim and --verdicts (or --histogram DIR)")
    config = _config(args)
    pipeline = build_pipeline(config, replay=args.replay)
    justification = _justification(args.justification)
    claim = _text_or_file(args.claim)
    verdicts = _verdicts(args.verdicts)
    probes = pipeline.prober.probe_links(justification.cited_urls) if pipeline.prober and justification.cited_urls else []
    result = score_justification(pipeline.gateway, claim, justification, verdicts, probes, pipeline.model("judge"),
                                 threshold=config.threshold, repair_budget=config.repair_budget)
    _emit({**result.to_dict(), "functional_links": result.functional_links, "rationales": dict(result.rationales)})
    return 0


def cmd_compare(args) -> int:
    config = _config(args)
    trio = _trio(args.trio)
    pipeline = build_pipeline(config, replay=args.replay, extra_models=trio)
    failures: list[dict] = []
    winner, votes = compare_evidence(
        pipeline.gateway,
        _text_or_file(args.claim),
        _text_or_file(args.evidence1),
        _text_or_file(args.evidence2),
        trio,
        failures=failures,
        repair_budget=config.repair_budget,
    )
    _emit({"winner": winner, "votes": [v.to_dict() for v in votes], "failures": failures})
    return 0


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caafc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="verify one claim or dialogue and print its report")
    p.add_argument("input", nargs="?", help="claim file (.txt or .json)")
    p.add_argument("--text", help="claim text given inline")
    p.add_argument("--id", help="claim id")
    p.add_argument("--date", help="claim date (YYYY-MM-DD)")
    p.add_argument("--mode", choices=("retrieved", "dataset"), default="retrieved")
    p.add_argument("--evidence", help="evidence text file for --mode dataset")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a benchmark file and report metrics")
    p.add_argument("dataset")
    p.add_argument("--adapter", required=True)
    p.add_argument("--mode", choices=("retrieved", "dataset"), default="dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", action="store_true", help="continue from the per-record checkpoint")
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("clean", help="flag and remove evidence-mismatched records")
    p.add_argument("dataset")
    p.add_argument("--adapter", required=True)
    p.add_argument("--trio", required=True, help="three comma-separated model ids")
    p.add_argument("--out", required=True)
    p.add_argument("--compare", action="store_true", help="vote on dataset vs updated evidence for each finding")
    _common(p)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("score", help="score a justification, or emit a histogram over score files")
    p.add_argument("--justification")
    p.add_argument("--claim")
    p.add_argument("--verdicts")
    p.add_argument("--histogram", metavar="DIR", help="directory of score/report JSON files")
    p.add_argument("--out", help="histogram CSV path (default stdout)")
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", help="2-of-3 vote on which evidence better settles a claim")
    p.add_argument("--claim", required=True)
    p.add_argument("--evidence1", required=True)
    p.add_argument("--evidence2", required=True)
    p.add_argument("--trio", required=True)
    _common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"caafc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, ParseError, UnknownRawLabel) as exc:
        print(f"caafc: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"caafc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CAAFCError as exc:
        print(f"caafc: pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
