"""Classification and agreement metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

from .errors import DegenerateVariance, InsufficientData, InvalidInput, LengthMismatch


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassificationReport:
    classes: list
    per_class: dict[Any, ClassScores]
    accuracy: float
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    confusion: list[list[int]]
    zero_division: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(s.support for s in self.per_class.values())

    def to_dict(self) -> dict:
        return {
            "classes": [str(c) for c in self.classes],
            "per_class": {
                str(c): {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for c, s in self.per_class.items()
            },
            "accuracy": self.accuracy,
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro_avg)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted_avg)),
            "confusion": self.confusion,
            "zero_division": list(self.zero_division),
        }

    def to_text(self, digits: int = 3) -> str:
        """Aligned table in the familiar precision/recall/f1-score/support layout."""
        names = [str(c) for c in self.classes] + ["weighted avg"]
        width = max(len(n) for n in names)
        fmt = f"{{:>{width}}} {{:>9}} {{:>9}} {{:>9}} {{:>9}}"
        num = f"{{:.{digits}f}}"
        lines = [fmt.format("", "precision", "recall", "f1-score", "support"), ""]
        for c in self.classes:
            s = self.per_class[c]
            lines.append(fmt.format(str(c), num.format(s.precision), num.format(s.recall), num.format(s.f1), s.support))
        lines.append("")
        lines.append(fmt.format("accuracy", "", "", num.format(self.accuracy), self.total))
        for name, avg in (("macro avg", self.macro_avg), ("weighted avg", self.weighted_avg)):
            lines.append(fmt.format(name, *(num.format(v) for v in avg), self.total))
        return "\n".join(lines) + "\n"


def _safe_div(num: float, den: float, what: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(what)
        return 0.0
    return num / den


def classification_report(gold: Sequence[Hashable], predicted: Sequence[Hashable], classes: Sequence[Hashable]) -> ClassificationReport:
    """One-vs-rest precision, recall and F1 per class, plus accuracy and averages.

    A zero denominator yields 0 and is recorded in ``zero_division``.
    """
    if len(gold) != len(predicted):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(predicted)} predictions")
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    for label in list(gold) + list(predicted):
        if label not in index:
            raise InvalidInput(f"label {label!r} not among classes {classes}")
    k = len(classes)
    cm = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, predicted):
        cm[index[g], index[p]] += 1
    return report_from_confusion(cm, classes)


def report_from_confusion(matrix, classes: Sequence[Hashable]) -> ClassificationReport:
    """Same report computed from a confusion matrix (rows gold, columns predicted)."""
    cm = np.asarray(matrix, dtype=np.int64)
    classes = list(classes)
    if cm.shape != (len(classes), len(classes)):
        raise InvalidInput(f"confusion matrix shape {cm.shape} does not fit {len(classes)} classes")
    flags: list[str] = []
    per_class = {}
    for i, c in enumerate(classes):
        tp = int(cm[i, i])
        predicted_c = int(cm[:, i].sum())
        support = int(cm[i, :].sum())
        precision = _safe_div(tp, predicted_c, f"precision[{c}]", flags)
        recall = _safe_div(tp, support, f"recall[{c}]", flags)
        f1 = _safe_div(2 * precision * recall, precision + recall, f"f1[{c}]", flags)
        per_class[c] = ClassScores(precision, recall, f1, support)
    total = int(cm.sum())
    accuracy = _safe_div(int(np.trace(cm)), total, "accuracy", flags)
    rows = np.array([[s.precision, s.recall, s.f1] for s in per_class.values()], dtype=float)
    supports = np.array([s.support for s in per_class.values()], dtype=float)
    macro = tuple(float(v) for v in rows.mean(axis=0)) if len(rows) else (0.0, 0.0, 0.0)
    if supports.sum() > 0:
        weighted = tuple(float(v) for v in (rows * supports[:, None]).sum(axis=0) / supports.sum())
    else:
        weighted = (0.0, 0.0, 0.0)
    return ClassificationReport(classes, per_class, accuracy, macro, weighted, cm.tolist(), flags)


def cohens_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement of two raters; 1.0 when both agree perfectly on a single class."""
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise LengthMismatch("kappa needs at least one rated item")
    categories = sorted(set(labels_a) | set(labels_b), key=repr)
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    p_e = sum((list(labels_a).count(c) / n) * (list(labels_b).count(c) / n) for c in categories)
    if math.isclose(p_e, 1.0):
        return 1.0 if math.isclose(p_o, 1.0) else 0.0
    return (p_o - p_e) / (1 - p_e)


def _is_missing(value: Any) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def krippendorff_alpha(ratings: Sequence[Sequence[Any]]) -> float:
    """Nominal Krippendorff's alpha for a raters × items table; ``None``/NaN marks a missing rating."""
    if len(ratings) < 2:
        raise InsufficientData("alpha needs at least two raters")
    n_items = len(ratings[0])
    if any(len(row) != n_items for row in ratings):
        raise LengthMismatch("every rater row must cover the same items")
    values = sorted({v for row in ratings for v in row if not _is_missing(v)}, key=repr)
    code = {v: i for i, v in enumerate(values)}
    k = len(values)
    coincidence = np.zeros((k, k), dtype=float)
    pairable = 0
    for item in range(n_items):
        counts = np.zeros(k, dtype=float)
        for row in ratings:
            if not _is_missing(row[item]):
                counts[code[row[item]]] += 1
        m = counts.sum()
        if m < 2:
            continue
        pairable += 1
        coincidence += (np.outer(counts, counts) - np.diag(counts)) / (m - 1)
    if pairable == 0:
        raise InsufficientData("no item carries two or more ratings")
    n_c = coincidence.sum(axis=1)
    n = n_c.sum()
    observed = coincidence.sum() - np.trace(coincidence)
    expected = (n_c.sum() ** 2 - (n_c**2).sum()) / (n - 1)
    if expected == 0:
        return 1.0
    return float(1.0 - observed / expected)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} values")
    if len(x) < 2:
        raise InsufficientData("correlation needs at least two points")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise DegenerateVariance("one of the series is constant")
    r = float(dx @ dy) / (sx * sy)
    return max(-1.0, min(1.0, r))
