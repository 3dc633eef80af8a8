import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for synth

from ptmkit.corpus_io import (
    parse_documents,
    parse_gene_protein_map,
    parse_kb_records,
    parse_mentions,
    read_records,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def table1_dir() -> Path:
    return FIXTURES / "table1"


@pytest.fixture(scope="session")
def table1(table1_dir):
    """The worked data-preparation example: abstract, mentions, map, KB record."""
    return {
        "docs": read_records(table1_dir / "docs.jsonl", parse_documents),
        "mentions": read_records(table1_dir / "mentions.tsv", parse_mentions),
        "map": read_records(table1_dir / "gene2protein.tsv", parse_gene_protein_map),
        "kb": read_records(table1_dir / "kb.tsv", parse_kb_records),
    }


@pytest.fixture(scope="session")
def corpus20_dir() -> Path:
    return FIXTURES / "corpus20"
