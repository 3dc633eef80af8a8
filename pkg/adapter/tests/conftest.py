import json
from pathlib import Path

import pytest

VOCAB = [
    "[PAD]",
    "[UNK]",
    "[CLS]",
    "[SEP]",
    "[MASK]",
    "protpart1",
    "protpart2",
    "prtig1",
    "prtig2",
    "phosphorylation",
    "dephosphorylation",
    "methylation",
    "acetylation",
    "ubiquitination",
    "deubiquitination",
    "of",
    "by",
    "the",
    "binds",
    "with",
    "observed",
    "direct",
    "robust",
    "interaction",
    "between",
    "and",
    "was",
    "in",
    "cells",
    "complex",
] + list("abcdefghijklmnopqrstuvwxyz0123456789")


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> Path:
    """A randomly initialised 7-label classifier small enough for CPU tests."""
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    directory = tmp_path_factory.mktemp("tiny-model")
    vocab_file = directory / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
        num_labels=7,
    )
    import torch

    torch.manual_seed(0)
    model = BertForSequenceClassification(config)
    checkpoint = directory / "checkpoint"
    model.save_pretrained(checkpoint)
    tokenizer.save_pretrained(checkpoint)
    return checkpoint


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """A small dataset directory in the pipeline's split-file format."""
    directory = tmp_path_factory.mktemp("dataset")
    rows = []
    for i in range(16):
        label = "phosphorylation" if i % 2 else "negative"
        trigger = "phosphorylation of" if label != "negative" else "binds"
        rows.append(
            {
                "pmid": str(100 + i),
                "a": "A1",
                "b": "B2",
                "label": label,
                "split": "train",
                "text": f"interaction between A1 and B2 {trigger} observed in cells",
                "others": ["C3"] if i % 3 == 0 else [],
            }
        )
    val = [dict(r, split="val", pmid=str(200 + i)) for i, r in enumerate(rows[:6])]
    for name, split_rows in (("train.jsonl", rows), ("val.jsonl", val)):
        with open(directory / name, "w", encoding="utf-8") as fh:
            for r in split_rows:
                fh.write(json.dumps(r) + "\n")
    return directory
