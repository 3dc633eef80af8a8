"""Metrics and post-hoc analyses over prediction sets.

Macro and micro averages run over the positive classes only; the negative
class acts as background (a positive sample predicted negative is that
class's false negative, a negative sample predicted positive is the predicted
class's false positive).  0/0 rates are defined as 0.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .calibration import CalibrationBins, PredictionRecord, compute_ece
from .corpus_io import Interaction, N_CLASSES

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase unigrams, split on non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


def default_stopwords() -> frozenset[str]:
    data = resources.files("ptmkit").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w for w in data.split() if w)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[true][predicted] over the 7 canonical classes."""

    counts: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sum(self, c: int) -> int:
        return sum(self.counts[c])

    def col_sum(self, c: int) -> int:
        return sum(self.counts[r][c] for r in range(N_CLASSES))


def confusion(pairs: Iterable[tuple[Interaction, Interaction]]) -> ConfusionMatrix:
    counts = [[0] * N_CLASSES for _ in range(N_CLASSES)]
    for true, predicted in pairs:
        counts[true][predicted] += 1
    return ConfusionMatrix(counts=tuple(tuple(row) for row in counts))


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def micro_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Pooled precision/recall/F1; F1 equals 2*TP / (2*TP + FP + FN) identically."""
    p = _rate(tp, tp + fp)
    r = _rate(tp, tp + fn)
    f1 = _rate(2 * tp, 2 * tp + fp + fn)
    return p, r, f1


def macro_average(values: Sequence[float]) -> float:
    """Unweighted mean over the per-class values included in the report."""
    if not values:
        return 0.0
    return math.fsum(values) / len(values)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    ece: float | None = None
    avg_std: float | None = None


@dataclass
class MetricsReport:
    per_class: dict[Interaction, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    support: int
    overall_ece: float | None = None
    overall_avg_std: float | None = None
    ece_support: int = 0
    per_class_ece_by_true: dict[Interaction, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class": {
                c.label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "ece": m.ece,
                    "avg_std": m.avg_std,
                }
                for c, m in sorted(self.per_class.items())
            },
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "micro": {"precision": self.micro_precision, "recall": self.micro_recall, "f1": self.micro_f1},
            "support": self.support,
            "ece": self.overall_ece,
            "avg_std": self.overall_avg_std,
            "ece_support": self.ece_support,
            "ece_by_true_class": {c.label: v for c, v in sorted(self.per_class_ece_by_true.items())},
        }


def prf(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class and averaged precision/recall/F1 from a confusion matrix.

    The report covers positive classes that occur in the evaluation set or
    were predicted at least once.
    """
    per_class: dict[Interaction, ClassMetrics] = {}
    tp_pool = fp_pool = fn_pool = 0
    for interaction in Interaction.positives():
        c = int(interaction)
        tp = matrix.counts[c][c]
        fp = matrix.col_sum(c) - tp
        fn = matrix.row_sum(c) - tp
        tp_pool, fp_pool, fn_pool = tp_pool + tp, fp_pool + fp, fn_pool + fn
        support = matrix.row_sum(c)
        if support > 0 or matrix.col_sum(c) > 0:
            per_class[interaction] = ClassMetrics(
                precision=_rate(tp, tp + fp),
                recall=_rate(tp, tp + fn),
                f1=_rate(2 * tp, 2 * tp + fp + fn),
                support=support,
            )
    reported = sorted(per_class)
    micro_p, micro_r, micro_f1 = micro_from_counts(tp_pool, fp_pool, fn_pool)
    return MetricsReport(
        per_class=per_class,
        macro_precision=macro_average([per_class[c].precision for c in reported]),
        macro_recall=macro_average([per_class[c].recall for c in reported]),
        macro_f1=macro_average([per_class[c].f1 for c in reported]),
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
        support=sum(matrix.row_sum(int(c)) for c in Interaction.positives()),
    )


def evaluate_predictions(
    preds: Sequence[PredictionRecord],
    gold: Mapping[str, Interaction],
    bins: int = 10,
) -> tuple[ConfusionMatrix, MetricsReport, CalibrationBins | None]:
    """Confusion matrix, metrics report, and reliability bins for one split.

    Per-class ECE and average ensemble std group predictions by predicted
    class; a true-class grouping is also emitted for comparison.  The overall
    ECE row covers the positive-class predictions.
    """
    pairs = []
    for p in preds:
        if p.sample_id not in gold:
            raise KeyError(f"no gold label for prediction {p.sample_id}")
        pairs.append((gold[p.sample_id], p.pred_class))
    matrix = confusion(pairs)
    report = prf(matrix)

    by_pred: dict[Interaction, list[PredictionRecord]] = {}
    by_true: dict[Interaction, list[tuple[float, bool]]] = {}
    positive_points: list[tuple[float, bool]] = []
    positive_stds: list[float] = []
    for p in preds:
        correct = gold[p.sample_id] is p.pred_class
        if p.pred_class is not Interaction.NEGATIVE:
            by_pred.setdefault(p.pred_class, []).append(p)
            positive_points.append((p.confidence, correct))
            positive_stds.append(p.std)
        true = gold[p.sample_id]
        if true is not Interaction.NEGATIVE:
            by_true.setdefault(true, []).append((p.confidence, correct))

    for interaction, group in by_pred.items():
        points = [(p.confidence, gold[p.sample_id] is p.pred_class) for p in group]
        ece = compute_ece(points, bins).ece
        avg_std = math.fsum(p.std for p in group) / len(group)
        if interaction in report.per_class:
            report.per_class[interaction].ece = ece
            report.per_class[interaction].avg_std = avg_std
    for interaction, points in by_true.items():
        report.per_class_ece_by_true[interaction] = compute_ece(points, bins).ece

    overall_bins = None
    if positive_points:
        overall_bins = compute_ece(positive_points, bins)
        report.overall_ece = overall_bins.ece
        report.overall_avg_std = math.fsum(positive_stds) / len(positive_stds)
        report.ece_support = len(positive_points)
    return matrix, report, overall_bins


def metrics_table(report: MetricsReport) -> str:
    """Aligned text table with P, R, F1, ECE, SD and Support columns."""

    def fmt(x: float | None, percent: bool = True) -> str:
        if x is None:
            return "-"
        return f"{x * 100:.2f}" if percent else f"{x:.2f}"

    rows = [("Interaction", "P", "R", "F1", "ECE", "SD", "Support")]
    for interaction in sorted(report.per_class):
        m = report.per_class[interaction]
        rows.append(
            (
                interaction.label,
                fmt(m.precision),
                fmt(m.recall),
                fmt(m.f1),
                fmt(m.ece, percent=False) if m.ece is not None else "-",
                fmt(m.avg_std, percent=False) if m.avg_std is not None else "-",
                str(m.support),
            )
        )
    rows.append(
        ("ECE", "-", "-", "-", fmt(report.overall_ece, percent=False), "-", str(report.ece_support))
    )
    rows.append(
        ("Average SD", "-", "-", "-", "-", fmt(report.overall_avg_std, percent=False), str(report.ece_support))
    )
    rows.append(
        (
            "Macro avg",
            fmt(report.macro_precision),
            fmt(report.macro_recall),
            fmt(report.macro_f1),
            "-",
            "-",
            str(report.support),
        )
    )
    rows.append(
        (
            "Micro avg",
            fmt(report.micro_precision),
            fmt(report.micro_recall),
            fmt(report.micro_f1),
            "-",
            "-",
            str(report.support),
        )
    )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def _count_vector(text: str) -> Counter:
    return Counter(tokenize(text))


def _cosine(u: Counter, v: Counter) -> float:
    if not u or not v:
        return 0.0
    dot = sum(n * v[t] for t, n in u.items())
    if dot == 0:
        return 0.0
    nu = math.sqrt(sum(n * n for n in u.values()))
    nv = math.sqrt(sum(n * n for n in v.values()))
    return dot / (nu * nv)


def nearest_train_similarity(
    eval_docs: Sequence[tuple[str, str]], train_docs: Sequence[tuple[str, str]]
) -> list[tuple[str, float, str | None]]:
    """For each (pmid, text) evaluation doc: the max unigram-count cosine
    similarity against the training docs and the nearest training pmid."""
    train_vectors = [(pmid, _count_vector(text)) for pmid, text in train_docs]
    results = []
    for pmid, text in eval_docs:
        vector = _count_vector(text)
        best, best_pmid = 0.0, None
        for train_pmid, train_vector in train_vectors:
            sim = _cosine(vector, train_vector)
            if sim > best:
                best, best_pmid = sim, train_pmid
        results.append((pmid, best, best_pmid))
    return results


def similarity_csv(rows: Sequence[tuple[str, float, str | None]]):
    yield "pmid,max_similarity,nearest_train_pmid\n"
    for pmid, sim, nearest in rows:
        yield f"{pmid},{sim!r},{nearest if nearest is not None else ''}\n"


def common_words(
    docs_by_class: Mapping[str, Sequence[str]],
    k: int,
    stopwords: frozenset[str] | None = None,
) -> dict[str, list[tuple[str, int]]]:
    """Top-k non-stopword unigrams per class, count descending then alphabetical."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if stopwords is None:
        stopwords = default_stopwords()
    out: dict[str, list[tuple[str, int]]] = {}
    for label, texts in docs_by_class.items():
        counts = Counter()
        for text in texts:
            counts.update(t for t in tokenize(text) if t not in stopwords)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out[label] = ranked[:k]
    return out


def common_words_csv(words_by_class: Mapping[str, Sequence[tuple[str, int]]]):
    yield "class,rank,word,count\n"
    for label in sorted(words_by_class):
        for rank, (word, count) in enumerate(words_by_class[label], start=1):
            yield f"{label},{rank},{word},{count}\n"
