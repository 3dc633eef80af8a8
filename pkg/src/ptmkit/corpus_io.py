"""On-disk formats shared by the whole pipeline.

Every multi-record file is line oriented (JSON-lines or TSV, UTF-8, LF) so
corpus-scale inputs can be streamed without whole-file buffering.  Lines whose
first character is ``#`` are provenance comments written by the CLI and are
skipped by every parser here.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import IO, Any, Callable, Iterable, Iterator, Mapping


class ParseError(ValueError):
    """Malformed input line; carries the source name and 1-based line number."""

    def __init__(self, message: str, source: str = "<stream>", line: int | None = None):
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")


class Interaction(enum.IntEnum):
    """The 7 interaction classes in canonical index order.

    Index 0 is the catch-all negative class ("other/Negative" in reports);
    the 6 positive PTM classes follow alphabetically.
    """

    NEGATIVE = 0
    ACETYLATION = 1
    DEPHOSPHORYLATION = 2
    DEUBIQUITINATION = 3
    METHYLATION = 4
    PHOSPHORYLATION = 5
    UBIQUITINATION = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def positives(cls) -> tuple["Interaction", ...]:
        return tuple(i for i in cls if i is not cls.NEGATIVE)

    @classmethod
    def from_label(cls, label: str) -> "Interaction":
        key = label.strip().lower()
        if key in ("negative", "other/negative", "other"):
            return cls.NEGATIVE
        try:
            return cls[key.upper()]
        except KeyError:
            accepted = ", ".join(i.label for i in cls.positives())
            raise ValueError(f"unknown interaction {label!r}; accepted: negative, {accepted}") from None


N_CLASSES = len(Interaction)
CLASS_LABELS = tuple(i.label for i in Interaction)

# Stemmed keywords whose presence in an abstract is required for a positive
# label to survive noise reduction.  Carried as data so extra classes (e.g. a
# demethylation class with stem "demethyl") can be enabled without code change.
# "phosphoryl" is a substring of "dephosphoryl" (and "ubiquitin" of
# "deubiquitin"); matching is satisfied by either surface form on purpose.
DEFAULT_TRIGGER_STEMS: Mapping[Interaction, tuple[str, ...]] = {
    Interaction.ACETYLATION: ("acetyl",),
    Interaction.DEPHOSPHORYLATION: ("dephosphoryl",),
    Interaction.DEUBIQUITINATION: ("deubiquitin",),
    Interaction.METHYLATION: ("methyl",),
    Interaction.PHOSPHORYLATION: ("phosphoryl",),
    Interaction.UBIQUITINATION: ("ubiquitin",),
}


@dataclass(frozen=True)
class Document:
    pmid: str
    text: str

    def __post_init__(self):
        if not self.pmid or not self.pmid.isdigit():
            raise ValueError(f"pmid must be a non-empty digit string, got {self.pmid!r}")
        if not self.text:
            raise ValueError(f"document {self.pmid}: text must be non-empty")


@dataclass(frozen=True)
class GeneMention:
    """A recognised gene name: character span [start, end) plus NCBI gene id."""

    pmid: str
    start: int
    end: int
    surface: str
    ncbi_id: str

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValueError(f"mention {self.pmid} {self.surface!r}: bad span [{self.start}, {self.end})")


@dataclass(frozen=True)
class GeneProteinMap:
    """NCBI gene id -> ordered list of protein accessions (file order kept)."""

    entries: Mapping[str, tuple[str, ...]]

    def __contains__(self, ncbi_id: str) -> bool:
        return ncbi_id in self.entries

    def get(self, ncbi_id: str) -> tuple[str, ...] | None:
        return self.entries.get(ncbi_id)


@dataclass(frozen=True)
class KbRecord:
    """One knowledge-base interaction row. Self-relations are allowed here;
    they are removed by the dataset builder."""

    pmid: str
    participant_a: str
    participant_b: str
    interaction: Interaction

    def __post_init__(self):
        if self.interaction is Interaction.NEGATIVE:
            raise ValueError("knowledge-base records carry positive classes only")

    @property
    def pair(self) -> tuple[str, str]:
        a, b = sorted((self.participant_a, self.participant_b))
        return a, b


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8")
    return raw


def iter_lines(stream: IO[bytes] | IO[str] | Iterable[bytes | str]) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, stripped line), skipping blanks and ``#`` comments."""
    for n, raw in enumerate(stream, start=1):
        line = _decode(raw).rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        yield n, line


def iter_jsonl(stream, source: str = "<stream>") -> Iterator[tuple[int, dict]]:
    """Stream JSON objects from a JSON-lines file, with line numbers for errors."""
    for n, line in iter_lines(stream):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed JSON ({e.msg})", source, n) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", source, n)
        yield n, obj


def json_line(obj: Any) -> str:
    """Canonical single-line JSON encoding used by every writer."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_documents(stream, source: str = "<stream>") -> list[Document]:
    """Parse abstracts from JSON-lines {"pmid","text"}; duplicate pmids are an error."""
    docs: list[Document] = []
    seen: set[str] = set()
    for n, obj in iter_jsonl(stream, source):
        if set(obj) != {"pmid", "text"}:
            raise ParseError(f"expected exactly keys pmid,text, got {sorted(obj)}", source, n)
        try:
            doc = Document(pmid=obj["pmid"], text=obj["text"])
        except (TypeError, ValueError) as e:
            raise ParseError(str(e), source, n) from None
        if doc.pmid in seen:
            raise ParseError(f"duplicate pmid {doc.pmid}", source, n)
        seen.add(doc.pmid)
        docs.append(doc)
    return docs


def serialize_documents(docs: Iterable[Document]) -> Iterator[str]:
    for d in docs:
        yield json_line({"pmid": d.pmid, "text": d.text}) + "\n"


def parse_mentions(stream, source: str = "<stream>") -> list[GeneMention]:
    """Parse gene mentions from 5-column TSV: pmid, start, end, surface, ncbi_id.

    Offsets are Unicode scalar positions; bounds against the abstract are
    checked later, at normalization time, because documents may not be loaded
    alongside the mention file.
    """
    mentions: list[GeneMention] = []
    for n, line in iter_lines(stream):
        cols = line.split("\t")
        if len(cols) != 5:
            raise ParseError(f"expected 5 tab-separated columns, got {len(cols)}", source, n)
        pmid, start_s, end_s, surface, ncbi_id = cols
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise ParseError(f"non-integer offsets {start_s!r}, {end_s!r}", source, n) from None
        try:
            mentions.append(GeneMention(pmid=pmid, start=start, end=end, surface=surface, ncbi_id=ncbi_id))
        except ValueError as e:
            raise ParseError(str(e), source, n) from None
    return mentions


def serialize_mentions(mentions: Iterable[GeneMention]) -> Iterator[str]:
    for m in mentions:
        yield f"{m.pmid}\t{m.start}\t{m.end}\t{m.surface}\t{m.ncbi_id}\n"


def parse_gene_protein_map(stream, source: str = "<stream>") -> GeneProteinMap:
    """Parse the gene->protein lookup from 2-column TSV (accessions comma separated).

    Accession order is significant and preserved exactly as in the file.
    """
    entries: dict[str, tuple[str, ...]] = {}
    for n, line in iter_lines(stream):
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected 2 tab-separated columns, got {len(cols)}", source, n)
        ncbi_id, accession_col = cols
        if ncbi_id in entries:
            raise ParseError(f"repeated NCBI gene id {ncbi_id}", source, n)
        accessions = accession_col.split(",") if accession_col else []
        if not accessions or any(not a for a in accessions):
            raise ParseError(f"gene {ncbi_id}: empty accession list or empty accession", source, n)
        entries[ncbi_id] = tuple(accessions)
    return GeneProteinMap(entries=entries)


def serialize_gene_protein_map(gp_map: GeneProteinMap) -> Iterator[str]:
    for ncbi_id, accessions in gp_map.entries.items():
        yield f"{ncbi_id}\t{','.join(accessions)}\n"


def parse_kb_records(stream, source: str = "<stream>") -> list[KbRecord]:
    """Parse interaction rows from 4-column TSV: pmid, accession, accession, class name."""
    records: list[KbRecord] = []
    for n, line in iter_lines(stream):
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(f"expected 4 tab-separated columns, got {len(cols)}", source, n)
        pmid, a, b, name = cols
        try:
            interaction = Interaction.from_label(name)
            if interaction is Interaction.NEGATIVE:
                raise ValueError("negative is not a knowledge-base class")
            record = KbRecord(pmid=pmid, participant_a=a, participant_b=b, interaction=interaction)
        except ValueError as e:
            raise ParseError(str(e), source, n) from None
        records.append(record)
    return records


def serialize_kb_records(records: Iterable[KbRecord]) -> Iterator[str]:
    for r in records:
        yield f"{r.pmid}\t{r.participant_a}\t{r.participant_b}\t{r.interaction.label}\n"


def write_lines(path, lines: Iterable[str], header: str | None = None) -> None:
    """Write text lines to ``path``; optional one-line provenance header first."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header is not None:
            fh.write(header if header.endswith("\n") else header + "\n")
        for line in lines:
            fh.write(line)


def read_records(path, parser: Callable[[IO[bytes], str], Any]):
    """Open ``path`` and run one of the parse_* functions with error context."""
    with open(path, "rb") as fh:
        return parser(fh, str(path))
