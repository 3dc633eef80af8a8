"""Build a train/validation/test dataset from knowledge-base records and abstracts.

Pipeline order: dedup -> drop self-relations -> normalize per (pmid, pair) ->
noise reduction -> negative generation -> document-level stratified split.
Splitting is per document so no PubMed id ever leaks across splits.
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus_io import (
    DEFAULT_TRIGGER_STEMS,
    Document,
    GeneMention,
    GeneProteinMap,
    Interaction,
    KbRecord,
    json_line,
)
from .normalization import NormalizedAbstract, normalize_document

SPLITS = ("train", "val", "test")

DROP_PARTICIPANT_MISSING = "participant-missing"
DROP_TRIGGER_MISSING = "trigger-missing"


@dataclass(frozen=True)
class LabeledSample:
    """One (document, unordered protein pair, label) training sample."""

    pmid: str
    pair: tuple[str, str]  # lexicographically sorted, members distinct
    label: Interaction
    text: str  # normalized abstract text
    others: tuple[str, ...]  # accessions in the abstract outside the pair
    split: str | None = None

    def __post_init__(self):
        if self.pair[0] >= self.pair[1]:
            raise ValueError(f"pair must be sorted and distinct, got {self.pair}")

    def with_split(self, split: str) -> "LabeledSample":
        return LabeledSample(self.pmid, self.pair, self.label, self.text, self.others, split)

    def to_json(self) -> str:
        return json_line(
            {
                "pmid": self.pmid,
                "a": self.pair[0],
                "b": self.pair[1],
                "label": self.label.label,
                "split": self.split,
                "text": self.text,
                "others": list(self.others),
            }
        )


def sample_from_json(obj: dict) -> LabeledSample:
    return LabeledSample(
        pmid=obj["pmid"],
        pair=(obj["a"], obj["b"]),
        label=Interaction.from_label(obj["label"]),
        text=obj["text"],
        others=tuple(obj.get("others", ())),
        split=obj.get("split"),
    )


@dataclass
class BuildReport:
    """Integer counters describing one dataset build."""

    raw_records: int = 0
    duplicates_removed: int = 0
    self_relations_removed: int = 0
    documents_missing: int = 0
    mentions_skipped: int = 0
    dropped: Counter = field(default_factory=Counter)  # reason -> count
    per_class: Counter = field(default_factory=Counter)  # label -> sample count
    per_split: Counter = field(default_factory=Counter)  # split -> sample count
    positives: int = 0
    negatives: int = 0

    def to_dict(self) -> dict:
        return {
            "raw_records": self.raw_records,
            "duplicates_removed": self.duplicates_removed,
            "self_relations_removed": self.self_relations_removed,
            "documents_missing": self.documents_missing,
            "mentions_skipped": self.mentions_skipped,
            "dropped": {k: self.dropped[k] for k in sorted(self.dropped)},
            "per_class": {k: self.per_class[k] for k in sorted(self.per_class)},
            "per_split": {s: self.per_split[s] for s in SPLITS},
            "positives": self.positives,
            "negatives": self.negatives,
        }


def dedup_records(records: Sequence[KbRecord]) -> tuple[list[KbRecord], int]:
    """Collapse records identical in (pmid, unordered pair, interaction); first kept."""
    seen: set[tuple] = set()
    kept: list[KbRecord] = []
    for r in records:
        key = (r.pmid, r.pair, r.interaction)
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    return kept, len(records) - len(kept)


def drop_self_relations(records: Sequence[KbRecord]) -> tuple[list[KbRecord], int]:
    kept = [r for r in records if r.participant_a != r.participant_b]
    return kept, len(records) - len(kept)


def reduce_noise(
    record: KbRecord,
    na: NormalizedAbstract,
    stems: Mapping[Interaction, tuple[str, ...]] = DEFAULT_TRIGGER_STEMS,
) -> str | None:
    """Return a drop reason, or None to keep the sample.

    A positive sample survives only if both participant accessions occur in
    the normalized abstract and at least one stem of its interaction type
    occurs case-insensitively as a substring.
    """
    if na.pmid != record.pmid:
        raise ValueError(f"abstract pmid {na.pmid} does not match record pmid {record.pmid}")
    if record.participant_a not in na.text or record.participant_b not in na.text:
        return DROP_PARTICIPANT_MISSING
    lowered = na.text.lower()
    if not any(stem in lowered for stem in stems.get(record.interaction, ())):
        return DROP_TRIGGER_MISSING
    return None


def generate_negatives(
    na: NormalizedAbstract, annotated: set[tuple[str, str]]
) -> list[LabeledSample]:
    """One negative sample per unordered protein pair in the abstract that is
    not annotated against the pmid for any interaction type."""
    proteins = sorted(na.proteins)
    out: list[LabeledSample] = []
    for i in range(len(proteins)):
        for j in range(i + 1, len(proteins)):
            pair = (proteins[i], proteins[j])
            if pair in annotated:
                continue
            others = tuple(p for p in proteins if p not in pair)
            out.append(LabeledSample(na.pmid, pair, Interaction.NEGATIVE, na.text, others))
    return out  # construction order is already lexicographic by pair


def split_dataset(
    samples: Sequence[LabeledSample],
    ratios: tuple[float, float, float],
    seed: int,
) -> dict[str, str]:
    """Assign every pmid to one of train/val/test.

    Greedy stratified assignment: documents are ordered by positive-sample
    count (descending, pmid ascending, seeded shuffle within equal counts)
    and each goes to the split with the largest remaining deficit relative to
    its per-class and total targets.  Deterministic for a fixed seed.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be 3 positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    by_doc: dict[str, Counter] = defaultdict(Counter)
    for s in samples:
        by_doc[s.pmid][s.label] += 1
    if len(by_doc) < 3:
        raise ValueError(f"need at least 3 distinct pmids to split, got {len(by_doc)}")

    totals = Counter()
    for counts in by_doc.values():
        totals.update(counts)
    n_total = sum(totals.values())

    def positives(pmid: str) -> int:
        return sum(n for c, n in by_doc[pmid].items() if c is not Interaction.NEGATIVE)

    ordered = sorted(by_doc, key=lambda p: (-positives(p), p))
    rng = random.Random(seed)
    shuffled: list[str] = []
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and positives(ordered[j]) == positives(ordered[i]):
            j += 1
        group = ordered[i:j]
        rng.shuffle(group)
        shuffled.extend(group)
        i = j

    target = {s: {c: ratios[k] * totals[c] for c in totals} for k, s in enumerate(SPLITS)}
    target_total = {s: ratios[k] * n_total for k, s in enumerate(SPLITS)}
    assigned: dict[str, Counter] = {s: Counter() for s in SPLITS}
    assigned_total = {s: 0 for s in SPLITS}
    eps = 1e-12

    assignment: dict[str, str] = {}
    for pmid in shuffled:
        counts = by_doc[pmid]
        doc_total = sum(counts.values())

        def deficit(split: str) -> float:
            d = doc_total * (target_total[split] - assigned_total[split]) / max(target_total[split], eps)
            for c, n in counts.items():
                d += n * (target[split][c] - assigned[split][c]) / max(target[split][c], eps)
            return d

        best = max(
            SPLITS,
            key=lambda s: (deficit(s), target_total[s] - assigned_total[s], -SPLITS.index(s)),
        )
        assignment[pmid] = best
        assigned[best].update(counts)
        assigned_total[best] += doc_total

    return assignment


def build_dataset(
    records: Sequence[KbRecord],
    documents: Sequence[Document],
    mentions: Sequence[GeneMention],
    gp_map: GeneProteinMap,
    ratios: tuple[float, float, float],
    seed: int,
    stems: Mapping[Interaction, tuple[str, ...]] = DEFAULT_TRIGGER_STEMS,
) -> tuple[list[LabeledSample], BuildReport]:
    """Run the full build pipeline; returns split-annotated samples plus counters."""
    report = BuildReport(raw_records=len(records))
    docs = {d.pmid: d for d in documents}
    if len(docs) != len(documents):
        raise ValueError("duplicate pmid in document list")
    mentions_by_pmid: dict[str, list[GeneMention]] = defaultdict(list)
    for m in mentions:
        mentions_by_pmid[m.pmid].append(m)

    deduped, report.duplicates_removed = dedup_records(records)
    kept, report.self_relations_removed = drop_self_relations(deduped)

    annotated: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for r in kept:
        annotated[r.pmid].add(r.pair)

    normalized: dict[tuple[str, tuple[str, str]], NormalizedAbstract] = {}
    pmid_order: list[str] = []
    positives_by_pmid: dict[str, list[LabeledSample]] = defaultdict(list)
    nas_by_pmid: dict[str, list[NormalizedAbstract]] = defaultdict(list)

    for r in kept:
        doc = docs.get(r.pmid)
        if doc is None:
            report.documents_missing += 1
            continue
        if r.pmid not in positives_by_pmid:
            pmid_order.append(r.pmid)
        key = (r.pmid, r.pair)
        na = normalized.get(key)
        if na is None:
            na = normalize_document(doc, mentions_by_pmid.get(r.pmid, ()), gp_map, kb_pair=r.pair)
            normalized[key] = na
            report.mentions_skipped += na.skipped
            nas_by_pmid[r.pmid].append(na)
        positives_by_pmid.setdefault(r.pmid, [])
        reason = reduce_noise(r, na, stems)
        if reason is not None:
            report.dropped[reason] += 1
            continue
        others = tuple(p for p in sorted(na.proteins) if p not in r.pair)
        positives_by_pmid[r.pmid].append(LabeledSample(r.pmid, r.pair, r.interaction, na.text, others))

    samples: list[LabeledSample] = []
    for pmid in pmid_order:
        samples.extend(positives_by_pmid[pmid])
        negatives: dict[tuple[str, str], LabeledSample] = {}
        for na in nas_by_pmid[pmid]:
            for neg in generate_negatives(na, annotated[pmid]):
                negatives.setdefault(neg.pair, neg)
        samples.extend(negatives[p] for p in sorted(negatives))

    assignment = split_dataset(samples, ratios, seed) if samples else {}
    out: list[LabeledSample] = []
    for s in samples:
        split = assignment[s.pmid]
        out.append(s.with_split(split))
        report.per_class[s.label.label] += 1
        report.per_split[split] += 1
        if s.label is Interaction.NEGATIVE:
            report.negatives += 1
        else:
            report.positives += 1
    return out, report


def read_samples(stream, source: str = "<stream>") -> list[LabeledSample]:
    from .corpus_io import iter_jsonl

    return [sample_from_json(obj) for _, obj in iter_jsonl(stream, source)]


def write_samples(samples: Iterable[LabeledSample]):
    for s in samples:
        yield s.to_json() + "\n"
