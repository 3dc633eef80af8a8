"""Rewrite gene mentions in abstracts to protein accessions.

When a knowledge-base pair is known for the abstract, a gene id mapping to
several accessions resolves to the pair member found in its accession list;
otherwise the first listed accession wins.  Mentions whose gene id is missing
from the lookup are left as-is and counted, so one bad id never discards a
whole document at corpus scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Iterable

from .corpus_io import Document, GeneMention, GeneProteinMap, json_line


class UnmappedGeneError(KeyError):
    def __init__(self, ncbi_id: str):
        self.ncbi_id = ncbi_id
        super().__init__(f"NCBI gene id {ncbi_id} not in gene-protein map")


class SpanError(ValueError):
    """Mention span out of bounds, overlapping another, or surface mismatch."""


@dataclass(frozen=True)
class NormalizedAbstract:
    """Abstract text with gene mentions replaced by protein accessions.

    ``proteins`` holds the distinct accessions introduced by replacement;
    ``mention_map`` records (original start, original end, accession) for each
    replaced mention in document order; ``skipped`` counts mentions kept
    verbatim because their gene id was unmapped.
    """

    pmid: str
    text: str
    proteins: frozenset[str]
    mention_map: tuple[tuple[int, int, str], ...] = ()
    skipped: int = 0

    def to_json(self) -> str:
        return json_line(
            {
                "pmid": self.pmid,
                "text": self.text,
                "proteins": sorted(self.proteins),
                "skipped": self.skipped,
            }
        )


def map_mention(ncbi_id: str, gp_map: GeneProteinMap, kb_pair: Collection[str] | None = None) -> str:
    """Resolve one gene id to a protein accession.

    With ``kb_pair`` given, prefer a pair member present in the gene's
    accession list; when both members appear, the one earliest in the list
    wins (the list order is significant).  Without a match, or without a
    pair, return the first accession.
    """
    accessions = gp_map.get(ncbi_id)
    if accessions is None:
        raise UnmappedGeneError(ncbi_id)
    if kb_pair:
        hits = [a for a in accessions if a in kb_pair]
        if hits:
            return hits[0]
    return accessions[0]


def normalize_document(
    doc: Document,
    mentions: Iterable[GeneMention],
    gp_map: GeneProteinMap,
    kb_pair: Collection[str] | None = None,
) -> NormalizedAbstract:
    """Replace each gene mention's surface with its mapped accession.

    Spans are validated against the document here (bounds, overlap, surface
    agreement) and replacements are applied right to left so earlier offsets
    stay valid.  The mapping is computed once per gene id and reused for all
    of its mentions in the document.
    """
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    prev_end = 0
    for m in ordered:
        if m.pmid != doc.pmid:
            raise ValueError(f"mention {m.surface!r} belongs to pmid {m.pmid}, not {doc.pmid}")
        if m.end > len(doc.text):
            raise SpanError(f"{doc.pmid}: span [{m.start}, {m.end}) out of bounds for text of length {len(doc.text)}")
        if m.start < prev_end:
            raise SpanError(f"{doc.pmid}: overlapping mention spans at offset {m.start}")
        if doc.text[m.start : m.end] != m.surface:
            raise SpanError(
                f"{doc.pmid}: surface {m.surface!r} does not match text "
                f"{doc.text[m.start:m.end]!r} at [{m.start}, {m.end})"
            )
        prev_end = m.end

    resolved: dict[str, str | None] = {}
    for m in ordered:
        if m.ncbi_id not in resolved:
            try:
                resolved[m.ncbi_id] = map_mention(m.ncbi_id, gp_map, kb_pair)
            except UnmappedGeneError:
                resolved[m.ncbi_id] = None

    text = doc.text
    replaced: list[tuple[int, int, str]] = []
    skipped = 0
    for m in reversed(ordered):
        accession = resolved[m.ncbi_id]
        if accession is None:
            skipped += 1
            continue
        text = text[: m.start] + accession + text[m.end :]
        replaced.append((m.start, m.end, accession))
    replaced.reverse()

    return NormalizedAbstract(
        pmid=doc.pmid,
        text=text,
        proteins=frozenset(acc for _, _, acc in replaced),
        mention_map=tuple(replaced),
        skipped=skipped,
    )


def normalized_from_json(obj: dict) -> NormalizedAbstract:
    return NormalizedAbstract(
        pmid=obj["pmid"],
        text=obj["text"],
        proteins=frozenset(obj["proteins"]),
        skipped=int(obj.get("skipped", 0)),
    )
