"""Model-input preparation: participant masking, truncation, pair enumeration.

The two candidate proteins become PROTPART1/PROTPART2 (assigned by
lexicographic accession order so the unordered-pair contract holds) and every
other protein becomes PRTIG1..PRTIGn in order of first occurrence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Collection, Iterable

from .corpus_io import json_line
from .normalization import NormalizedAbstract


class MaskingError(ValueError):
    pass


@dataclass(frozen=True)
class TransformedInput:
    sample_id: str
    pmid: str
    pair: tuple[str, str]
    text: str

    def to_json(self) -> str:
        return json_line(
            {"id": self.sample_id, "pmid": self.pmid, "a": self.pair[0], "b": self.pair[1], "text": self.text}
        )


def transformed_from_json(obj: dict) -> TransformedInput:
    return TransformedInput(sample_id=obj["id"], pmid=obj["pmid"], pair=(obj["a"], obj["b"]), text=obj["text"])


def sample_id_for(pmid: str, pair: Collection[str]) -> str:
    a, b = sorted(pair)
    return f"{pmid}:{a}:{b}"


def split_sample_id(sample_id: str) -> tuple[str, tuple[str, str]]:
    parts = sample_id.split(":")
    if len(parts) != 3:
        raise ValueError(f"sample id {sample_id!r} is not pmid:a:b")
    return parts[0], (parts[1], parts[2])


def token_pattern(accessions: Iterable[str]) -> re.Pattern:
    # Longest alternative first so a longer accession is never split by a
    # shorter one that prefixes it; matches only at non-alphanumeric boundaries.
    ordered = sorted(set(accessions), key=lambda a: (-len(a), a))
    alternation = "|".join(re.escape(a) for a in ordered)
    return re.compile(rf"(?<![A-Za-z0-9])({alternation})(?![A-Za-z0-9])")


def mask_participants(na: NormalizedAbstract, pair: Collection[str]) -> TransformedInput:
    """Mask the candidate pair and all bystander proteins in the abstract."""
    a, b = sorted(pair)
    if a == b:
        raise MaskingError(f"pair members must be distinct, got {a!r} twice")
    pattern = token_pattern(set(na.proteins) | {a, b})

    markers: dict[str, str] = {a: "PROTPART1", b: "PROTPART2"}
    seen: set[str] = set()
    next_bystander = 1
    for m in pattern.finditer(na.text):
        accession = m.group(1)
        seen.add(accession)
        if accession not in markers:
            markers[accession] = f"PRTIG{next_bystander}"
            next_bystander += 1
    for accession in (a, b):
        if accession not in seen:
            raise MaskingError(f"{na.pmid}: participant {accession} does not occur in the abstract")

    text = pattern.sub(lambda m: markers[m.group(1)], na.text)
    return TransformedInput(sample_id=sample_id_for(na.pmid, (a, b)), pmid=na.pmid, pair=(a, b), text=text)


def whitespace_token_count(text: str) -> int:
    return len(text.split())


def truncate(text: str, budget: int, length_fn: Callable[[str], int] = whitespace_token_count) -> str:
    """Clip text to the longest prefix measuring at most ``budget`` units.

    ``length_fn`` maps text to a unit count and must be non-decreasing under
    prefix extension (true of any tokenizer-based counter).  The default
    counts whitespace tokens; sub-word budgets belong to the scorer adapter.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if length_fn(text) <= budget:
        return text
    lo, hi = 0, len(text)  # invariant: length_fn(text[:lo]) <= budget < length_fn(text[:hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if length_fn(text[:mid]) <= budget:
            lo = mid
        else:
            hi = mid
    return text[:lo].rstrip()


def enumerate_pairs(na: NormalizedAbstract) -> list[tuple[str, str]]:
    """All unordered pairs of distinct proteins in the abstract, sorted."""
    proteins = sorted(na.proteins)
    return [(proteins[i], proteins[j]) for i in range(len(proteins)) for j in range(i + 1, len(proteins))]
