"""
Cleaning a benchmark of outdated evidence
=========================================

Three models verify every record on the evidence shipped with the dataset.
Records where all three agree with each other but not with the gold label are
set aside, and for each of those the models vote on whether the dataset
evidence or newer evidence better settles the claim.
"""

from pathlib import Path

from caafc.config import build_pipeline, load_config
from caafc.datasets import clean, compare_evidence, detect_mismatches, label_counts, load_dataset

HERE = Path(__file__).resolve().parent
CLEAN = HERE.parent / "fixtures" / "clean"
TRIO = ["gemma-fixture", "llama-fixture", "qwen-fixture"]

records = load_dataset(CLEAN / "dataset.jsonl", "claim_generic")
print("gold label counts:", label_counts(records))

pipeline = build_pipeline(load_config(CLEAN / "config.json"), extra_models=TRIO)

# %% three verdicts per record
findings = detect_mismatches(pipeline, records, TRIO)
for f in findings:
    votes = " ".join(f"{v.value:>12}" for v in f.model_verdicts.values())
    print(f"{f.record_id}  gold {f.gold_label.value:>12}  models {votes}  {'FLAGGED' if f.flagged else ''}")

# %% which evidence is better for the flagged records?
by_id = {r.id: r for r in records}
for f in findings:
    if not f.flagged:
        continue
    record = by_id[f.record_id]
    winner, votes = compare_evidence(pipeline.gateway, record.input.text, record.evidence_text,
                                     record.raw["updated_evidence"], TRIO)
    print(f"\n{f.record_id}: winner {winner}")
    for v in votes:
        print(f"  {v.model_id}: {v.better_evidence} ({v.reason_category}) {v.reason}")

kept, removed = clean(records, findings)
print(f"\nkept {len(kept)}, removed {len(removed)}:", [r.id for r in removed])
