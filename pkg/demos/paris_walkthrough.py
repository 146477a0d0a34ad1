"""
Walking one claim through the pipeline
======================================

Runs the fixture configuration on "Paris is the capital of Germany and it has
the Eiffel Tower." and prints what each stage produced. Everything answers
from files under ``fixtures/claims``, so the output is identical every run.
"""

from pathlib import Path

from caafc.config import build_pipeline, load_config
from caafc.segmenter import ClaimInput

HERE = Path(__file__).resolve().parent
CLAIMS = HERE.parent / "fixtures" / "claims"

pipeline = build_pipeline(load_config(CLAIMS / "config.json"))
claim = ClaimInput("paris", (CLAIMS / "paris.txt").read_text().strip(), claim_date="2024-01-15")

# %% full run: verdicts, justification, actionability score
report = pipeline.run(claim)
r = report.result

print("atomic claims:")
for c in r.atomic_claims:
    print("  -", c.text)

print("\nprimary sources:", ", ".join(s.descriptor for s in r.primary_sources))
print("\nquery:\n ", r.query)

print("\nevidence items (chronological):")
for item in r.bundle.items:
    print(f"  {item.source_date or 'undated'}  {item.source_url}")

print("\nsubclaim verdicts:")
for v in r.final.subclaim_verdicts:
    print(f"  [{v.label}] {v.subclaim_text}")
print("final verdict:", report.label)

# %% the justification and how the judge scored it
print("\njustification:\n ", report.justification.text)
print("corrected claim:", report.justification.corrected_claim)
s = report.score
print(f"\nscore: detection {s.error_detection} + correction {s.error_correction} + links {s.link_score} "
      f"= {s.total}  ({'pass' if s.passed else 'below threshold'})")
print("revisions:", report.revisions)
print("model calls by stage:", r.calls)
