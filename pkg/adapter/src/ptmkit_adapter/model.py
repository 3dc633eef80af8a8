"""Model loading and scoring with the sequence budget applied here.

Inference runs with dropout disabled (eval mode); ensemble diversity comes
from training-time seeds, not inference noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from . import MAX_SEQUENCE_UNITS, N_CLASSES


@dataclass
class AdapterConfig:
    checkpoint: str
    max_units: int = MAX_SEQUENCE_UNITS
    batch_size: int = 16
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.max_units > MAX_SEQUENCE_UNITS:
            raise ValueError(f"max_units {self.max_units} exceeds the model limit {MAX_SEQUENCE_UNITS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Scorer:
    def __init__(self, config: AdapterConfig):
        self.config = config
        torch.manual_seed(config.seed)
        self.tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
        self.model = AutoModelForSequenceClassification.from_pretrained(config.checkpoint)
        if self.model.config.num_labels != N_CLASSES:
            raise ValueError(f"checkpoint has {self.model.config.num_labels} labels, expected {N_CLASSES}")
        self.model.to(config.device)
        self.model.eval()

    @torch.no_grad()
    def score(self, texts: list[str]) -> list[list[float]]:
        """7-class probabilities per text; sequences over the budget are
        truncated to max_units (2 of which are the boundary markers)."""
        probs: list[list[float]] = []
        for start in range(0, len(texts), self.config.batch_size):
            batch = texts[start : start + self.config.batch_size]
            encoded = self.tokenizer(
                batch,
                truncation=True,
                max_length=self.config.max_units,
                padding=True,
                return_tensors="pt",
            ).to(self.config.device)
            logits = self.model(**encoded).logits
            probs.extend(torch.softmax(logits.double(), dim=-1).cpu().tolist())
        return probs
