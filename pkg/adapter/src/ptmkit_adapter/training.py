"""Fine-tuning with best-epoch snapshotting by validation F1-macro.

The training data is imbalanced, so the kept checkpoint is the epoch with the
highest validation F1-macro (over the positive classes), not the lowest loss.
Ensemble members are produced by re-running with different seeds on identical
data and hyperparameters; dropout is active during training only.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from . import LABEL_INDEX, MAX_SEQUENCE_UNITS, N_CLASSES
from .masking import mask_row


@dataclass
class TrainConfig:
    data_dir: str
    out_dir: str
    base_model: str
    seed: int = 0
    epochs: int = 3
    batch_size: int = 8
    learning_rate: float = 2e-5
    max_units: int = MAX_SEQUENCE_UNITS
    device: str = "cpu"


def read_split(path: Path) -> list[tuple[str, int]]:
    """(masked text, label index) pairs from a dataset_builder JSONL split."""
    rows: list[tuple[str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            obj = json.loads(line)
            text = mask_row(obj["text"], obj["a"], obj["b"], obj.get("others", ()))
            rows.append((text, LABEL_INDEX[obj["label"]]))
    return rows


def f1_macro(true: list[int], predicted: list[int]) -> float:
    """Unweighted mean F1 over the positive classes present in the data or
    the predictions; 0/0 rates are 0."""
    classes = sorted({c for c in true if c != 0} | {c for c in predicted if c != 0})
    if not classes:
        return 0.0
    scores = []
    for c in classes:
        tp = sum(1 for t, p in zip(true, predicted) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, predicted) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, predicted) if t == c and p != c)
        scores.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return sum(scores) / len(scores)


def select_best_epoch(log: list[tuple[int, float]]) -> int:
    """Epoch with the highest validation F1-macro; ties keep the earliest."""
    if not log:
        raise ValueError("empty training log")
    best_epoch, best_score = log[0]
    for epoch, score in log[1:]:
        if score > best_score:
            best_epoch, best_score = epoch, score
    return best_epoch


def _evaluate(model, tokenizer, rows, config: TrainConfig) -> float:
    model.eval()
    true = [label for _, label in rows]
    predicted: list[int] = []
    with torch.no_grad():
        for start in range(0, len(rows), config.batch_size):
            batch = [text for text, _ in rows[start : start + config.batch_size]]
            encoded = tokenizer(
                batch, truncation=True, max_length=config.max_units, padding=True, return_tensors="pt"
            ).to(config.device)
            predicted.extend(model(**encoded).logits.argmax(dim=-1).cpu().tolist())
    model.train()
    return f1_macro(true, predicted)


def train(config: TrainConfig) -> Path:
    """Fine-tune and save the best-epoch checkpoint; returns the output path."""
    random.seed(config.seed)
    torch.manual_seed(config.seed)

    data_dir = Path(config.data_dir)
    train_rows = read_split(data_dir / "train.jsonl")
    val_rows = read_split(data_dir / "val.jsonl")
    if not train_rows or not val_rows:
        raise ValueError(f"{config.data_dir}: need non-empty train.jsonl and val.jsonl")

    tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    model = AutoModelForSequenceClassification.from_pretrained(config.base_model, num_labels=N_CLASSES)
    model.to(config.device)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log: list[tuple[int, float]] = []
    best_score = float("-inf")
    order = list(range(len(train_rows)))
    for epoch in range(1, config.epochs + 1):
        random.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = [train_rows[i] for i in order[start : start + config.batch_size]]
            encoded = tokenizer(
                [text for text, _ in batch],
                truncation=True,
                max_length=config.max_units,
                padding=True,
                return_tensors="pt",
            ).to(config.device)
            labels = torch.tensor([label for _, label in batch], device=config.device)
            loss = model(**encoded, labels=labels).loss
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
        score = _evaluate(model, tokenizer, val_rows, config)
        log.append((epoch, score))
        if score > best_score:  # snapshot the best epoch, not the last
            best_score = score
            model.save_pretrained(out_dir)
            tokenizer.save_pretrained(out_dir)

    with open(out_dir / "training_log.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "seed": config.seed,
                "epochs": config.epochs,
                "val_f1_macro": {str(epoch): score for epoch, score in log},
                "best_epoch": select_best_epoch(log),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    return out_dir
