"""Corpus-scale triplet bookkeeping.

A triplet is (accession, PTM, accession) with the unordered pair stored
smaller-first.  Evidence is kept per abstract: scoring the same pair twice in
one abstract never inflates the abstract count (the max-confidence entry
wins, ties broken toward lower std so aggregation is order independent).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .calibration import PredictionRecord
from .corpus_io import Interaction, ParseError, iter_lines, json_line

TripletKey = tuple[str, Interaction, str]


def canonicalize(a: str, b: str, ptm: Interaction) -> TripletKey:
    """Ordered triplet key; the lexicographically smaller accession comes first."""
    if a == b:
        raise ValueError(f"self-relation {a!r} cannot form a triplet")
    if ptm is Interaction.NEGATIVE:
        raise ValueError("triplets carry positive interaction types only")
    return (a, ptm, b) if a < b else (b, ptm, a)


@dataclass(frozen=True)
class TripletPrediction:
    a: str
    ptm: Interaction
    b: str
    evidence: Mapping[str, tuple[float, float]]  # pmid -> (confidence, std)

    @property
    def key(self) -> TripletKey:
        return (self.a, self.ptm, self.b)

    @property
    def n_abstracts(self) -> int:
        return len(self.evidence)

    def to_json(self) -> str:
        pmids = sorted(self.evidence)
        return json_line(
            {
                "a": self.a,
                "ptm": self.ptm.label,
                "b": self.b,
                "n_abstracts": len(pmids),
                "pmids": pmids,
                "max_conf": max(c for c, _ in self.evidence.values()),
                "min_std": min(s for _, s in self.evidence.values()),
            }
        )


@dataclass(frozen=True)
class AggregateStats:
    total_predictions: int
    unique_triplets: int


def aggregate_triplets(preds: Iterable[PredictionRecord]) -> tuple[list[TripletPrediction], AggregateStats]:
    """Collapse positive predictions into unique triplets with per-pmid evidence.

    Mirrors the large-scale reporting split between total predictions and
    unique triplets.  Output is sorted by triplet key.
    """
    evidence: dict[TripletKey, dict[str, tuple[float, float]]] = {}
    total = 0
    for p in preds:
        if p.pred_class is Interaction.NEGATIVE:
            continue
        total += 1
        key = canonicalize(p.pair[0], p.pair[1], p.pred_class)
        entry = evidence.setdefault(key, {})
        current = entry.get(p.pmid)
        candidate = (p.confidence, p.std)
        if current is None or candidate[0] > current[0] or (candidate[0] == current[0] and candidate[1] < current[1]):
            entry[p.pmid] = candidate
    triplets = [
        TripletPrediction(a=key[0], ptm=key[1], b=key[2], evidence=evidence[key])
        for key in sorted(evidence, key=lambda k: (k[0], int(k[1]), k[2]))
    ]
    return triplets, AggregateStats(total_predictions=total, unique_triplets=len(triplets))


def filter_multi_abstract(triplets: Iterable[TripletPrediction], min_evidence: int) -> list[TripletPrediction]:
    """Keep triplets supported by at least ``min_evidence`` distinct abstracts."""
    if min_evidence < 1:
        raise ValueError(f"min_evidence must be >= 1, got {min_evidence}")
    return [t for t in triplets if t.n_abstracts >= min_evidence]


def recall_against_reference(
    triplets: Iterable[TripletPrediction], reference: set[TripletKey]
) -> dict[str, tuple[int, int, float]]:
    """Per PTM: (reference triplets found, reference total, found ratio)."""
    predicted = {t.key for t in triplets}
    out: dict[str, tuple[int, int, float]] = {}
    for interaction in Interaction.positives():
        ref = {k for k in reference if k[1] is interaction}
        found = len(ref & predicted)
        ratio = found / len(ref) if ref else 0.0
        out[interaction.label] = (found, len(ref), ratio)
    return out


def load_reference(stream, source: str = "<stream>") -> tuple[set[TripletKey], int]:
    """Read a 3-column TSV reference (accession, ptm, accession).

    Rows without both accessions, with unknown PTM names, or describing
    self-relations are dropped; the drop count is returned so reports can
    distinguish entries lacking identifiers.
    """
    keys: set[TripletKey] = set()
    dropped = 0
    for n, line in iter_lines(stream):
        cols = line.split("\t")
        if len(cols) != 3:
            raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}", source, n)
        a, name, b = cols
        if not a or not b or a == b:
            dropped += 1
            continue
        try:
            ptm = Interaction.from_label(name)
            if ptm is Interaction.NEGATIVE:
                raise ValueError("negative")
        except ValueError:
            dropped += 1
            continue
        keys.add(canonicalize(a, b, ptm))
    return keys, dropped


def triplet_from_json(obj: dict) -> TripletPrediction:
    conf, std = float(obj["max_conf"]), float(obj["min_std"])
    return TripletPrediction(
        a=obj["a"],
        ptm=Interaction.from_label(obj["ptm"]),
        b=obj["b"],
        evidence={pmid: (conf, std) for pmid in obj["pmids"]},
    )


def read_triplets(stream, source: str = "<stream>") -> list[TripletPrediction]:
    from .corpus_io import iter_jsonl

    return [triplet_from_json(obj) for _, obj in iter_jsonl(stream, source)]


def write_triplets(triplets: Iterable[TripletPrediction]):
    for t in triplets:
        yield t.to_json() + "\n"


def read_reference(path) -> tuple[set[TripletKey], int]:
    with open(path, "rb") as fh:
        return load_reference(fh, str(path))
