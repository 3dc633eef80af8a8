"""Participant masking for dataset rows, matching the pipeline's wire format.

The candidate pair becomes PROTPART1/PROTPART2 (lexicographically smaller
accession first), every other protein becomes PRTIG1..n by order of first
occurrence, and replacement happens only at non-alphanumeric boundaries.
Inference-time requests arrive already masked; this module exists so training
inputs are masked by exactly the same documented rules.
"""

from __future__ import annotations

import re
from typing import Iterable


def _pattern(accessions: Iterable[str]) -> re.Pattern:
    ordered = sorted(set(accessions), key=lambda a: (-len(a), a))
    return re.compile(
        r"(?<![A-Za-z0-9])(" + "|".join(re.escape(a) for a in ordered) + r")(?![A-Za-z0-9])"
    )


def mask_row(text: str, a: str, b: str, others: Iterable[str]) -> str:
    lo, hi = sorted((a, b))
    markers = {lo: "PROTPART1", hi: "PROTPART2"}
    pattern = _pattern(set(others) | {lo, hi})
    next_index = 1
    for match in pattern.finditer(text):
        accession = match.group(1)
        if accession not in markers:
            markers[accession] = f"PRTIG{next_index}"
            next_index += 1
    return pattern.sub(lambda m: markers[m.group(1)], text)
