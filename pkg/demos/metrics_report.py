"""
Evaluation metrics
==================

Rebuilds the dialogue hallucination confusion matrix from its published
per-class recall and support, prints the classification report, then looks at
agreement statistics and the distribution of actionability scores.
"""

import numpy as np

from caafc.actionability import score_histogram
from caafc.metrics import cohens_kappa, krippendorff_alpha, pearson, report_from_confusion

# published recall and support per class
recall = {"factual": 0.467, "hallucination": 0.935}
support = {"factual": 122, "hallucination": 123}

# true positives follow from recall x support; the rest of each row is the miss count
tp = {c: round(recall[c] * support[c]) for c in recall}
matrix = np.array([
    [tp["factual"], support["factual"] - tp["factual"]],
    [support["hallucination"] - tp["hallucination"], tp["hallucination"]],
])
print(matrix)

report = report_from_confusion(matrix, ["factual", "hallucination"])
print(report.to_text())

# %% agreement between three annotators on 30 items
rng = np.random.default_rng(0)
truth = rng.choice(["true", "false", "unverifiable"], size=30)
raters = [np.where(rng.random(30) < 0.85, truth, rng.choice(["true", "false", "unverifiable"], size=30))
          for _ in range(3)]
print("kappa(rater 1, rater 2):", round(cohens_kappa(list(raters[0]), list(raters[1])), 3))
print("alpha(all three):      ", round(krippendorff_alpha([list(r) for r in raters]), 3))

# %% actionability scores: human vs judge
human = rng.integers(0, 8, size=40)
judge = np.clip(human + rng.integers(-1, 2, size=40), 0, 7)
print("pearson(human, judge):", round(pearson(human, judge), 3))
for b, density in score_histogram(judge):
    print(f"{b} {'#' * int(density * 60)}")
