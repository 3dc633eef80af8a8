"""Ensemble aggregation, calibration error, and confidence/variation thresholds.

The ensemble mean probability of the predicted class is the confidence; the
population standard deviation (divide by M, not M-1) of the member
probabilities of that class is the variation.  Per-class cutoffs are
nearest-rank percentiles of the training predictions, so results reproduce
across languages without interpolation subtleties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus_io import Interaction, N_CLASSES, json_line
from .scoring import RawEnsembleOutput
from .transform import split_sample_id


def ensemble_stats(per_model: Sequence[Sequence[float]]) -> tuple[list[float], int, float, float]:
    """Mean distribution, predicted class index, confidence, and confidence std.

    Works for any number of classes; ties in the argmax go to the lowest
    index.  The std is taken over the member probabilities of the predicted
    class only.
    """
    m = len(per_model)
    if m < 1:
        raise ValueError("need at least one model output")
    n = len(per_model[0])
    if any(len(row) != n for row in per_model):
        raise ValueError("ragged per-model probabilities")
    mean = [math.fsum(row[c] for row in per_model) / m for c in range(n)]
    pred = 0
    for c in range(1, n):
        if mean[c] > mean[pred]:
            pred = c
    confidence = mean[pred]
    std = math.sqrt(math.fsum((row[pred] - confidence) ** 2 for row in per_model) / m)
    return mean, pred, confidence, std


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    pmid: str
    pair: tuple[str, str]
    mean_probs: tuple[float, ...]
    pred_class: Interaction
    confidence: float
    std: float
    per_model: tuple[tuple[float, ...], ...] | None = None

    def to_json(self) -> str:
        obj = {
            "id": self.sample_id,
            "pmid": self.pmid,
            "a": self.pair[0],
            "b": self.pair[1],
            "per_model": [list(p) for p in self.per_model] if self.per_model is not None else [],
            "mean": list(self.mean_probs),
            "pred": self.pred_class.label,
            "conf": self.confidence,
            "std": self.std,
        }
        return json_line(obj)


def prediction_from_json(obj: dict) -> PredictionRecord:
    per_model = tuple(tuple(float(x) for x in row) for row in obj.get("per_model", ()))
    return PredictionRecord(
        sample_id=obj["id"],
        pmid=obj["pmid"],
        pair=(obj["a"], obj["b"]),
        mean_probs=tuple(float(x) for x in obj["mean"]),
        pred_class=Interaction.from_label(obj["pred"]),
        confidence=float(obj["conf"]),
        std=float(obj["std"]),
        per_model=per_model or None,
    )


def aggregate(raw: RawEnsembleOutput) -> PredictionRecord:
    """Collapse one ensemble output into a prediction record."""
    mean, pred, confidence, std = ensemble_stats(raw.per_model)
    if len(mean) != N_CLASSES:
        raise ValueError(f"expected {N_CLASSES}-class distributions, got {len(mean)}")
    pmid, pair = split_sample_id(raw.sample_id)
    return PredictionRecord(
        sample_id=raw.sample_id,
        pmid=pmid,
        pair=pair,
        mean_probs=tuple(mean),
        pred_class=Interaction(pred),
        confidence=confidence,
        std=std,
        per_model=raw.per_model,
    )


@dataclass(frozen=True)
class CalibrationBins:
    """K equal bins over (0, 1]; bin k covers ((k-1)/K, k/K]."""

    k: int
    n: int
    counts: tuple[int, ...]
    accuracies: tuple[float | None, ...]  # None for empty bins
    confidences: tuple[float | None, ...]
    ece: float

    def csv_lines(self) -> Iterable[str]:
        yield "bin_low,bin_high,count,accuracy,confidence\n"
        for i in range(self.k):
            acc = "" if self.accuracies[i] is None else repr(self.accuracies[i])
            conf = "" if self.confidences[i] is None else repr(self.confidences[i])
            yield f"{i / self.k},{(i + 1) / self.k},{self.counts[i]},{acc},{conf}\n"


def bin_index(confidence: float, k: int) -> int:
    """0-based bin for a confidence in [0, 1]; confidence 0 falls in the first bin."""
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence} outside [0, 1]")
    return min(max(math.ceil(confidence * k), 1), k) - 1


def compute_ece(preds: Iterable[tuple[float, bool]], k: int) -> CalibrationBins:
    """Expected calibration error over K equally spaced confidence bins."""
    if k < 1:
        raise ValueError(f"bin count must be >= 1, got {k}")
    counts = [0] * k
    correct = [0] * k
    conf_sum = [0.0] * k
    n = 0
    for confidence, is_correct in preds:
        b = bin_index(confidence, k)
        counts[b] += 1
        correct[b] += 1 if is_correct else 0
        conf_sum[b] += confidence
        n += 1
    if n == 0:
        raise ValueError("cannot compute calibration error over zero predictions")
    accuracies = [correct[b] / counts[b] if counts[b] else None for b in range(k)]
    confidences = [conf_sum[b] / counts[b] if counts[b] else None for b in range(k)]
    ece = math.fsum(
        counts[b] / n * abs(accuracies[b] - confidences[b]) for b in range(k) if counts[b]
    )
    return CalibrationBins(
        k=k,
        n=n,
        counts=tuple(counts),
        accuracies=tuple(accuracies),
        confidences=tuple(confidences),
        ece=ece,
    )


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """The ceil(p/100 * n)-th order statistic (1-based), no interpolation."""
    if not values:
        raise ValueError("empty sample")
    if not 0 < percentile <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class ClassThresholds:
    conf_cutoff: float
    std_cutoff: float
    min_conf: float
    max_std: float


@dataclass(frozen=True)
class ThresholdProfile:
    """Per positive class: percentile cutoffs plus training min/max stats.

    Classes with no training predictions are absent and never pass the
    high-quality filter.
    """

    per_class: Mapping[Interaction, ClassThresholds] = field(default_factory=dict)
    percentile: float = 50.0

    def to_json(self) -> str:
        obj = {
            "percentile": self.percentile,
            "classes": {
                c.label: {
                    "conf_cutoff": t.conf_cutoff,
                    "std_cutoff": t.std_cutoff,
                    "min_conf": t.min_conf,
                    "max_std": t.max_std,
                }
                for c, t in sorted(self.per_class.items())
            },
        }
        return json_line(obj)


def profile_from_json(obj: dict) -> ThresholdProfile:
    per_class = {
        Interaction.from_label(label): ClassThresholds(
            conf_cutoff=float(t["conf_cutoff"]),
            std_cutoff=float(t["std_cutoff"]),
            min_conf=float(t["min_conf"]),
            max_std=float(t["max_std"]),
        )
        for label, t in obj["classes"].items()
    }
    return ThresholdProfile(per_class=per_class, percentile=float(obj.get("percentile", 50.0)))


def learn_thresholds(
    train_preds: Sequence[PredictionRecord],
    *,
    percentile: float = 50.0,
    correct_only: bool = False,
    gold: Mapping[str, Interaction] | None = None,
) -> ThresholdProfile:
    """Per-class confidence/std cutoffs from training predictions.

    Groups by predicted class.  With ``correct_only`` set, only predictions
    matching the supplied gold labels contribute (the default uses all).
    """
    if correct_only and gold is None:
        raise ValueError("correct_only requires gold labels")
    groups: dict[Interaction, list[PredictionRecord]] = {}
    for p in train_preds:
        if p.pred_class is Interaction.NEGATIVE:
            continue
        if correct_only and gold.get(p.sample_id) is not p.pred_class:
            continue
        groups.setdefault(p.pred_class, []).append(p)
    per_class = {}
    for interaction, preds in groups.items():
        confs = [p.confidence for p in preds]
        stds = [p.std for p in preds]
        per_class[interaction] = ClassThresholds(
            conf_cutoff=nearest_rank(confs, percentile),
            std_cutoff=nearest_rank(stds, percentile),
            min_conf=min(confs),
            max_std=max(stds),
        )
    return ThresholdProfile(per_class=per_class, percentile=percentile)


def filter_high_quality(
    preds: Iterable[PredictionRecord], profile: ThresholdProfile
) -> list[PredictionRecord]:
    """Positive predictions above the confidence cutoff and below the std cutoff
    of their predicted class (both strict)."""
    retained = []
    for p in preds:
        if p.pred_class is Interaction.NEGATIVE:
            continue
        t = profile.per_class.get(p.pred_class)
        if t is None:
            continue
        if p.confidence > t.conf_cutoff and p.std < t.std_cutoff:
            retained.append(p)
    return retained


def partition_low_quality(
    preds: Iterable[PredictionRecord], profile: ThresholdProfile
) -> list[PredictionRecord]:
    """Predictions below every training confidence and above every training std
    of their predicted class; classes without training stats never match."""
    low = []
    for p in preds:
        t = profile.per_class.get(p.pred_class)
        if t is None:
            continue
        if p.confidence < t.min_conf and p.std > t.max_std:
            low.append(p)
    return low


def read_predictions(stream, source: str = "<stream>") -> list[PredictionRecord]:
    from .corpus_io import iter_jsonl

    return [prediction_from_json(obj) for _, obj in iter_jsonl(stream, source)]


def write_predictions(preds: Iterable[PredictionRecord]):
    for p in preds:
        yield p.to_json() + "\n"
