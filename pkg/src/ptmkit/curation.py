"""Human review queue over filtered predictions.

State lives in an append-only JSON-lines event log (item loads and verdicts);
replaying the log reconstructs the queue exactly, so a crash between
acknowledgment and restart loses nothing.  A snapshot file can shortcut
replay but is never the source of truth.
"""

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import random

from .calibration import PredictionRecord
from .corpus_io import DEFAULT_TRIGGER_STEMS, Interaction, json_line
from .transform import token_pattern

DECISIONS = ("correct", "incorrect", "unsure")

# Error taxonomy for rejected predictions.
CATEGORIES = (
    "dna-methylation",
    "ner",
    "no-trigger-word",
    "opposite-type",
    "relationship-not-described",
    "not-related-to-ppi",
)

PENDING = "pending"
REVIEWED = "reviewed"


class UnknownItemError(KeyError):
    pass


class VerdictConflictError(ValueError):
    """A reviewed item received a different verdict than the recorded one."""


@dataclass(frozen=True)
class HighlightSpan:
    start: int
    end: int
    kind: str  # "participant" | "trigger"


@dataclass(frozen=True)
class CurationItem:
    item_id: str
    a: str
    ptm: Interaction
    b: str
    pmid: str
    text: str
    spans: tuple[HighlightSpan, ...]
    confidence: float
    std: float
    status: str = PENDING

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "a": self.a,
            "ptm": self.ptm.label,
            "b": self.b,
            "pmid": self.pmid,
            "text": self.text,
            "spans": [{"start": s.start, "end": s.end, "kind": s.kind} for s in self.spans],
            "confidence": self.confidence,
            "std": self.std,
            "status": self.status,
        }


def item_from_dict(obj: dict) -> CurationItem:
    return CurationItem(
        item_id=obj["item_id"],
        a=obj["a"],
        ptm=Interaction.from_label(obj["ptm"]),
        b=obj["b"],
        pmid=obj["pmid"],
        text=obj["text"],
        spans=tuple(HighlightSpan(s["start"], s["end"], s["kind"]) for s in obj.get("spans", ())),
        confidence=float(obj["confidence"]),
        std=float(obj["std"]),
        status=obj.get("status", PENDING),
    )


@dataclass(frozen=True)
class Verdict:
    item_id: str
    decision: str
    category: str | None = None
    reviewer: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise ValueError(f"decision must be one of {DECISIONS}, got {self.decision!r}")
        if self.decision == "incorrect":
            if self.category not in CATEGORIES:
                raise ValueError(f"incorrect verdicts need a category from {CATEGORIES}")
        elif self.category is not None:
            raise ValueError(f"category only accompanies incorrect verdicts, got {self.category!r}")

    def same_judgement(self, other: "Verdict") -> bool:
        return (
            self.item_id == other.item_id
            and self.decision == other.decision
            and self.category == other.category
        )

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "decision": self.decision,
            "category": self.category,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }


def verdict_from_dict(obj: dict) -> Verdict:
    return Verdict(
        item_id=obj["item_id"],
        decision=obj["decision"],
        category=obj.get("category"),
        reviewer=obj.get("reviewer", ""),
        timestamp=float(obj.get("timestamp", 0.0)),
    )


def highlight_spans(
    text: str,
    pair: Sequence[str],
    ptm: Interaction,
    stems: Mapping[Interaction, tuple[str, ...]] = DEFAULT_TRIGGER_STEMS,
) -> tuple[HighlightSpan, ...]:
    """Participant-occurrence and trigger-stem spans, computed server side so
    every client renders identically."""
    spans: list[HighlightSpan] = []
    pattern = token_pattern(pair)
    for m in pattern.finditer(text):
        spans.append(HighlightSpan(m.start(1), m.end(1), "participant"))
    lowered = text.lower()
    for stem in stems.get(ptm, ()):
        start = 0
        while True:
            i = lowered.find(stem, start)
            if i < 0:
                break
            spans.append(HighlightSpan(i, i + len(stem), "trigger"))
            start = i + 1
    spans.sort(key=lambda s: (s.start, s.end, s.kind))
    return tuple(spans)


def build_items(
    preds: Sequence[PredictionRecord],
    texts: Mapping[str, str],
    stems: Mapping[Interaction, tuple[str, ...]] = DEFAULT_TRIGGER_STEMS,
) -> tuple[list[CurationItem], int]:
    """Curation items for positive predictions whose abstract text is known.

    Returns (items, number skipped for missing abstracts).
    """
    items: list[CurationItem] = []
    missing = 0
    for p in preds:
        if p.pred_class is Interaction.NEGATIVE:
            continue
        text = texts.get(p.pmid)
        if text is None:
            missing += 1
            continue
        items.append(
            CurationItem(
                item_id=p.sample_id,
                a=p.pair[0],
                ptm=p.pred_class,
                b=p.pair[1],
                pmid=p.pmid,
                text=text,
                spans=highlight_spans(text, p.pair, p.pred_class, stems),
                confidence=p.confidence,
                std=p.std,
            )
        )
    return items, missing


@dataclass
class PrecisionReport:
    """Verdict tallies per PTM plus strict and unsure-inclusive precision.

    ``precision_strict`` divides by decided verdicts only; ``precision_incl``
    counts unsure verdicts in the denominator (the convention behind the
    published headline numbers).  Ratios are None when undefined.
    """

    per_ptm: dict[str, dict] = field(default_factory=dict)
    correct: int = 0
    incorrect: int = 0
    unsure: int = 0
    categories: dict[str, int] = field(default_factory=dict)

    @staticmethod
    def _ratio(correct: int, denominator: int) -> float | None:
        return correct / denominator if denominator else None

    @property
    def precision_strict(self) -> float | None:
        return self._ratio(self.correct, self.correct + self.incorrect)

    @property
    def precision_incl(self) -> float | None:
        return self._ratio(self.correct, self.correct + self.incorrect + self.unsure)

    def to_dict(self) -> dict:
        return {
            "per_ptm": self.per_ptm,
            "correct": self.correct,
            "incorrect": self.incorrect,
            "unsure": self.unsure,
            "categories": {k: self.categories[k] for k in sorted(self.categories)},
            "precision_strict": self.precision_strict,
            "precision_incl": self.precision_incl,
        }


def precision_report(verdicts_by_ptm: Mapping[str, Sequence[Verdict]]) -> PrecisionReport:
    """Aggregate verdicts into per-PTM and overall precision tallies."""
    report = PrecisionReport()
    for ptm in sorted(verdicts_by_ptm):
        correct = incorrect = unsure = 0
        categories: dict[str, int] = {}
        for v in verdicts_by_ptm[ptm]:
            if v.decision == "correct":
                correct += 1
            elif v.decision == "incorrect":
                incorrect += 1
                categories[v.category] = categories.get(v.category, 0) + 1
                report.categories[v.category] = report.categories.get(v.category, 0) + 1
            else:
                unsure += 1
        report.per_ptm[ptm] = {
            "correct": correct,
            "incorrect": incorrect,
            "unsure": unsure,
            "categories": {k: categories[k] for k in sorted(categories)},
            "precision_strict": PrecisionReport._ratio(correct, correct + incorrect),
            "precision_incl": PrecisionReport._ratio(correct, correct + incorrect + unsure),
        }
        report.correct += correct
        report.incorrect += incorrect
        report.unsure += unsure
    return report


def sample_items(items: Iterable[CurationItem], per_ptm: int, seed: int) -> list[CurationItem]:
    """Up to ``per_ptm`` pending items per positive class, uniformly at random
    without replacement; reproducible for a fixed seed."""
    if per_ptm < 1:
        raise ValueError(f"per_ptm must be >= 1, got {per_ptm}")
    rng = random.Random(seed)
    batch: list[CurationItem] = []
    pool = sorted(items, key=lambda i: i.item_id)
    for interaction in Interaction.positives():
        pending = [i for i in pool if i.status == PENDING and i.ptm is interaction]
        take = min(per_ptm, len(pending))
        if take:
            batch.extend(rng.sample(pending, take))
    return batch


class CurationQueue:
    """Durable review queue: in-memory state + append-only event log.

    One logical writer: verdict recording is serialized under a lock and the
    log line is flushed to disk before the call returns.  A snapshot file, if
    configured, is written every ``snapshot_every`` verdicts as a warm-start
    optimization; the log stays the source of truth and is always replayed
    over it (events are idempotent).
    """

    def __init__(
        self,
        log_path: str | os.PathLike,
        snapshot_path: str | os.PathLike | None = None,
        snapshot_every: int = 100,
    ):
        self.log_path = str(log_path)
        self.snapshot_path = str(snapshot_path) if snapshot_path else None
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self.items: dict[str, CurationItem] = {}
        self.verdicts: dict[str, Verdict] = {}
        if self.snapshot_path and os.path.exists(self.snapshot_path):
            self._load_snapshot(self.snapshot_path)
        self._replay()

    def _load_snapshot(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            state = json.load(fh)
        for obj in state.get("items", ()):
            item = item_from_dict(obj)
            self.items[item.item_id] = item
        for obj in state.get("verdicts", ()):
            verdict = verdict_from_dict(obj)
            self.verdicts[verdict.item_id] = verdict

    def _replay(self) -> None:
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                event = json.loads(line)
                self._apply(event)

    def _apply(self, event: dict) -> None:
        if event["event"] == "item":
            item = item_from_dict(event["item"])
            self.items.setdefault(item.item_id, item)
        elif event["event"] == "verdict":
            verdict = verdict_from_dict(event["verdict"])
            self.verdicts[verdict.item_id] = verdict
            item = self.items.get(verdict.item_id)
            if item is not None:
                self.items[verdict.item_id] = replace(item, status=REVIEWED)
        else:
            raise ValueError(f"unknown event type {event['event']!r}")

    def _append(self, event: dict) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json_line(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_items(self, items: Iterable[CurationItem]) -> int:
        """Append unseen items to the queue; re-loading known ids is a no-op."""
        added = 0
        with self._lock:
            for item in items:
                if item.item_id in self.items:
                    continue
                event = {"event": "item", "item": item.to_dict()}
                self._append(event)
                self._apply(event)
                added += 1
        return added

    def get(self, item_id: str) -> CurationItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItemError(item_id)
        return item

    def list_items(
        self, status: str | None = None, ptm: str | None = None, limit: int | None = None
    ) -> list[CurationItem]:
        out = []
        for item_id in sorted(self.items):
            item = self.items[item_id]
            if status is not None and item.status != status:
                continue
            if ptm is not None and item.ptm.label != ptm:
                continue
            out.append(item)
            if limit is not None and len(out) >= limit:
                break
        return out

    def record_verdict(self, verdict: Verdict) -> CurationItem:
        """Apply one verdict: pending -> reviewed.  Identical re-submission is
        an idempotent accept; a conflicting one raises."""
        with self._lock:
            item = self.items.get(verdict.item_id)
            if item is None:
                raise UnknownItemError(verdict.item_id)
            existing = self.verdicts.get(verdict.item_id)
            if existing is not None:
                if existing.same_judgement(verdict):
                    return self.items[verdict.item_id]
                raise VerdictConflictError(
                    f"item {verdict.item_id} already reviewed as {existing.decision}"
                    f"{'/' + existing.category if existing.category else ''}"
                )
            if verdict.timestamp == 0.0:
                verdict = replace(verdict, timestamp=time.time())
            event = {"event": "verdict", "verdict": verdict.to_dict()}
            self._append(event)  # durable before acknowledgment
            self._apply(event)
            if self.snapshot_path and len(self.verdicts) % self.snapshot_every == 0:
                self.write_snapshot(self.snapshot_path)
            return self.items[verdict.item_id]

    def sample_review_batch(self, per_ptm: int, seed: int) -> list[CurationItem]:
        return sample_items(self.items.values(), per_ptm, seed)

    def report(self) -> PrecisionReport:
        by_ptm: dict[str, list[Verdict]] = {}
        for item_id, verdict in self.verdicts.items():
            item = self.items.get(item_id)
            if item is None:
                continue
            by_ptm.setdefault(item.ptm.label, []).append(verdict)
        return precision_report(by_ptm)

    def write_snapshot(self, path: str | os.PathLike) -> None:
        state = {
            "items": [self.items[i].to_dict() for i in sorted(self.items)],
            "verdicts": [self.verdicts[i].to_dict() for i in sorted(self.verdicts)],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(state, fh, ensure_ascii=False)


def create_app(queue: CurationQueue, ui_dir: str | None = None):
    """FastAPI app exposing the review API (and the UI bundle, if present)."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel

    app = FastAPI(title="ptmkit curation service")

    class VerdictBody(BaseModel):
        decision: str
        category: str | None = None
        reviewer: str = ""

    class BatchBody(BaseModel):
        per_ptm: int
        seed: int

    @app.get("/meta")
    def meta():
        return {
            "decisions": list(DECISIONS),
            "categories": list(CATEGORIES),
            "ptms": [i.label for i in Interaction.positives()],
        }

    @app.get("/items")
    def list_items(status: str | None = None, ptm: str | None = None, limit: int | None = None):
        return [i.to_dict() for i in queue.list_items(status=status, ptm=ptm, limit=limit)]

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        try:
            return queue.get(item_id).to_dict()
        except UnknownItemError:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id}") from None

    @app.post("/items/{item_id}/verdict")
    def post_verdict(item_id: str, body: VerdictBody):
        try:
            verdict = Verdict(
                item_id=item_id,
                decision=body.decision,
                category=body.category,
                reviewer=body.reviewer,
            )
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        try:
            item = queue.record_verdict(verdict)
        except UnknownItemError:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id}") from None
        except VerdictConflictError as e:
            raise HTTPException(status_code=409, detail=str(e)) from None
        return {"item": item.to_dict()}

    @app.get("/report")
    def report():
        return JSONResponse(queue.report().to_dict())

    @app.post("/batches")
    def batches(body: BatchBody):
        try:
            batch = queue.sample_review_batch(per_ptm=body.per_ptm, seed=body.seed)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        return [i.to_dict() for i in batch]

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
