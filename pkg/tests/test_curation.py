import json

import pytest
from fastapi.testclient import TestClient

from ptmkit.calibration import PredictionRecord
from ptmkit.corpus_io import Interaction, N_CLASSES
from ptmkit.curation import (
    CATEGORIES,
    CurationItem,
    CurationQueue,
    UnknownItemError,
    Verdict,
    VerdictConflictError,
    build_items,
    create_app,
    highlight_spans,
    precision_report,
    sample_items,
)

PHOS = Interaction.PHOSPHORYLATION
METH = Interaction.METHYLATION


def make_item(i, ptm=PHOS, text="PROTPART phosphorylation text A1 B2"):
    return CurationItem(
        item_id=f"{i}:A1:B2",
        a="A1",
        ptm=ptm,
        b="B2",
        pmid=str(i),
        text=text,
        spans=(),
        confidence=0.9,
        std=0.05,
    )


def make_pred(pmid, ptm=PHOS, conf=0.92, std=0.03):
    probs = [0.0] * N_CLASSES
    probs[ptm] = conf
    probs[Interaction.NEGATIVE] = 1 - conf
    return PredictionRecord(f"{pmid}:A1:B2", pmid, ("A1", "B2"), tuple(probs), ptm, conf, std)


class TestVerdictType:
    def test_category_required_iff_incorrect(self):
        Verdict("1:A1:B2", "correct")
        Verdict("1:A1:B2", "incorrect", "ner")
        with pytest.raises(ValueError):
            Verdict("1:A1:B2", "incorrect")
        with pytest.raises(ValueError):
            Verdict("1:A1:B2", "correct", "ner")
        with pytest.raises(ValueError):
            Verdict("1:A1:B2", "incorrect", "made-up")

    def test_taxonomy_mirrors_error_classes(self):
        assert CATEGORIES == (
            "dna-methylation",
            "ner",
            "no-trigger-word",
            "opposite-type",
            "relationship-not-described",
            "not-related-to-ppi",
        )


class TestHighlights:
    def test_participant_and_trigger_spans(self):
        text = "A1 causes phosphorylation of B2"
        spans = highlight_spans(text, ("A1", "B2"), PHOS)
        kinds = [(text[s.start : s.end], s.kind) for s in spans]
        assert ("A1", "participant") in kinds
        assert ("B2", "participant") in kinds
        assert ("phosphoryl", "trigger") in kinds

    def test_no_trigger_spans_when_stem_absent(self):
        spans = highlight_spans("A1 binds B2", ("A1", "B2"), Interaction.UBIQUITINATION)
        assert all(s.kind == "participant" for s in spans)

    def test_build_items_skips_missing_abstracts(self):
        preds = [make_pred("1"), make_pred("404")]
        items, missing = build_items(preds, {"1": "A1 phosphorylation B2"})
        assert len(items) == 1 and missing == 1
        assert items[0].item_id == "1:A1:B2"
        assert any(s.kind == "trigger" for s in items[0].spans)


class TestQueueLifecycle:
    def test_verdict_transitions(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(1)])
        assert queue.get("1:A1:B2").status == "pending"
        queue.record_verdict(Verdict("1:A1:B2", "correct", reviewer="rev"))
        assert queue.get("1:A1:B2").status == "reviewed"

    def test_unknown_item(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        with pytest.raises(UnknownItemError):
            queue.record_verdict(Verdict("404:A1:B2", "correct"))

    def test_idempotent_resubmission_accepted(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(1)])
        queue.record_verdict(Verdict("1:A1:B2", "incorrect", "ner"))
        queue.record_verdict(Verdict("1:A1:B2", "incorrect", "ner"))  # no error
        assert queue.report().incorrect == 1

    def test_conflicting_verdict_rejected(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(1)])
        queue.record_verdict(Verdict("1:A1:B2", "correct"))
        with pytest.raises(VerdictConflictError):
            queue.record_verdict(Verdict("1:A1:B2", "incorrect", "ner"))

    def test_reload_is_idempotent(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        assert queue.load_items([make_item(1), make_item(2)]) == 2
        assert queue.load_items([make_item(1), make_item(3)]) == 1
        assert len(queue.items) == 3

    def test_crash_replay_reconstructs_state(self, tmp_path):
        log = tmp_path / "log.jsonl"
        queue = CurationQueue(log)
        queue.load_items([make_item(i) for i in range(1, 6)])
        queue.record_verdict(Verdict("1:A1:B2", "correct", reviewer="a"))
        queue.record_verdict(Verdict("2:A1:B2", "incorrect", "no-trigger-word", reviewer="b"))
        queue.record_verdict(Verdict("3:A1:B2", "unsure", reviewer="c"))
        before_items = {i: item.to_dict() for i, item in queue.items.items()}
        before_report = queue.report().to_dict()
        replayed = CurationQueue(log)  # simulated restart
        assert {i: item.to_dict() for i, item in replayed.items.items()} == before_items
        assert replayed.report().to_dict() == before_report

    def test_snapshot_warm_start_equals_pure_replay(self, tmp_path):
        log, snapshot = tmp_path / "log.jsonl", tmp_path / "snap.json"
        queue = CurationQueue(log, snapshot_path=snapshot, snapshot_every=2)
        queue.load_items([make_item(i) for i in range(6)])
        for i in range(4):
            queue.record_verdict(Verdict(f"{i}:A1:B2", "correct"))
        assert snapshot.exists()  # written at verdicts 2 and 4
        warm = CurationQueue(log, snapshot_path=snapshot)
        cold = CurationQueue(log)
        assert {k: v.to_dict() for k, v in warm.items.items()} == {
            k: v.to_dict() for k, v in cold.items.items()
        }
        assert warm.report().to_dict() == cold.report().to_dict()

    def test_report_recomputed_from_log_matches(self, tmp_path):
        log = tmp_path / "log.jsonl"
        queue = CurationQueue(log)
        queue.load_items([make_item(i, ptm=PHOS if i % 2 else METH) for i in range(1, 9)])
        queue.record_verdict(Verdict("1:A1:B2", "correct"))
        queue.record_verdict(Verdict("2:A1:B2", "incorrect", "ner"))
        queue.record_verdict(Verdict("3:A1:B2", "unsure"))
        # independent recount straight off the log file
        items, verdicts = {}, []
        with open(log) as fh:
            for line in fh:
                event = json.loads(line)
                if event["event"] == "item":
                    items[event["item"]["item_id"]] = event["item"]["ptm"]
                else:
                    verdicts.append(event["verdict"])
        by_ptm = {}
        for v in verdicts:
            by_ptm.setdefault(items[v["item_id"]], []).append(
                Verdict(v["item_id"], v["decision"], v.get("category"), v.get("reviewer", ""))
            )
        assert precision_report(by_ptm).to_dict() == queue.report().to_dict()


class TestSampling:
    def test_per_class_caps(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(i) for i in range(100)])
        queue.load_items([make_item(100 + i, ptm=METH) for i in range(4)])
        batch = queue.sample_review_batch(per_ptm=30, seed=5)
        assert sum(1 for i in batch if i.ptm is PHOS) == 30
        assert sum(1 for i in batch if i.ptm is METH) == 4  # fewer available than the cap

    def test_seed_reproducibility(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(i) for i in range(50)])
        a = [i.item_id for i in queue.sample_review_batch(10, seed=3)]
        b = [i.item_id for i in queue.sample_review_batch(10, seed=3)]
        assert a == b
        c = [i.item_id for i in queue.sample_review_batch(10, seed=4)]
        assert a != c

    def test_never_returns_reviewed(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        queue.load_items([make_item(i) for i in range(10)])
        for i in range(5):
            queue.record_verdict(Verdict(f"{i}:A1:B2", "correct"))
        batch = queue.sample_review_batch(per_ptm=30, seed=1)
        assert all(i.status == "pending" for i in batch)
        assert len(batch) == 5

    def test_standalone_sampler(self):
        items = [make_item(i) for i in range(8)]
        assert [i.item_id for i in sample_items(items, 3, seed=2)] == [
            i.item_id for i in sample_items(list(reversed(items)), 3, seed=2)
        ]


# Verdict grids mirroring the published human-evaluation tables.
TABLE6 = {
    "acetylation": {"correct": 0, "unsure": 1, "categories": {}},
    "dephosphorylation": {
        "correct": 11,
        "unsure": 0,
        "categories": {"ner": 2, "no-trigger-word": 1, "opposite-type": 1, "relationship-not-described": 14},
    },
    "methylation": {
        "correct": 11,
        "unsure": 1,
        "categories": {"dna-methylation": 2, "ner": 1, "relationship-not-described": 4},
    },
    "phosphorylation": {
        "correct": 6,
        "unsure": 0,
        "categories": {"ner": 3, "no-trigger-word": 2, "relationship-not-described": 19},
    },
    "ubiquitination": {"correct": 0, "unsure": 0, "categories": {"no-trigger-word": 4}},
}
TABLE7 = {
    "methylation": {"correct": 4, "unsure": 0, "categories": {}},
    "phosphorylation": {
        "correct": 16,
        "unsure": 4,
        "categories": {"ner": 2, "not-related-to-ppi": 1, "relationship-not-described": 7},
    },
}


def verdicts_from_grid(grid):
    by_ptm = {}
    n = 0
    for ptm, spec in grid.items():
        vs = []
        for _ in range(spec["correct"]):
            vs.append(Verdict(f"{n}:A1:B2", "correct"))
            n += 1
        for category, count in spec["categories"].items():
            for _ in range(count):
                vs.append(Verdict(f"{n}:A1:B2", "incorrect", category))
                n += 1
        for _ in range(spec["unsure"]):
            vs.append(Verdict(f"{n}:A1:B2", "unsure"))
            n += 1
        by_ptm[ptm] = vs
    return by_ptm


class TestPrecisionReport:
    def test_published_overall_tallies(self):
        report = precision_report(verdicts_from_grid(TABLE6))
        assert (report.correct, report.incorrect, report.unsure) == (28, 53, 2)
        assert report.precision_incl == 28 / 83
        assert report.precision_strict == 28 / 81
        assert report.categories["relationship-not-described"] == 37

    def test_published_multi_abstract_tallies(self):
        report = precision_report(verdicts_from_grid(TABLE7))
        assert (report.correct, report.incorrect, report.unsure) == (20, 10, 4)
        assert report.precision_incl == 20 / 34
        assert report.precision_strict == 20 / 30

    def test_per_ptm_rows(self):
        report = precision_report(verdicts_from_grid(TABLE6))
        assert report.per_ptm["methylation"]["correct"] == 11
        assert report.per_ptm["methylation"]["precision_strict"] == 11 / 18
        assert report.per_ptm["ubiquitination"]["precision_strict"] == 0.0

    def test_zero_verdicts(self):
        report = precision_report({})
        assert report.precision_strict is None and report.precision_incl is None


class TestHttpApi:
    @pytest.fixture()
    def client(self, tmp_path):
        queue = CurationQueue(tmp_path / "log.jsonl")
        items, _ = build_items(
            [make_pred("1"), make_pred("2"), make_pred("3", ptm=METH)],
            {"1": "A1 phosphorylation of B2", "2": "A1 with B2", "3": "A1 methylation B2"},
        )
        queue.load_items(items)
        return TestClient(create_app(queue)), queue

    def test_meta_single_sources_taxonomy(self, client):
        api, _ = client
        meta = api.get("/meta").json()
        assert meta["categories"] == list(CATEGORIES)
        assert "phosphorylation" in meta["ptms"]

    def test_list_and_filter(self, client):
        api, _ = client
        assert len(api.get("/items").json()) == 3
        assert len(api.get("/items", params={"ptm": "phosphorylation"}).json()) == 2
        assert len(api.get("/items", params={"limit": 1}).json()) == 1

    def test_get_single_item(self, client):
        api, _ = client
        item = api.get("/items/1:A1:B2").json()
        assert item["pmid"] == "1"
        assert any(s["kind"] == "trigger" for s in item["spans"])
        assert api.get("/items/404:X:Y").status_code == 404

    def test_verdict_roundtrip(self, client):
        api, queue = client
        resp = api.post(
            "/items/1:A1:B2/verdict",
            json={"decision": "incorrect", "category": "relationship-not-described", "reviewer": "me"},
        )
        assert resp.status_code == 200
        assert resp.json()["item"]["status"] == "reviewed"
        assert queue.verdicts["1:A1:B2"].category == "relationship-not-described"

    def test_verdict_conflict_409(self, client):
        api, _ = client
        api.post("/items/1:A1:B2/verdict", json={"decision": "correct"})
        resp = api.post("/items/1:A1:B2/verdict", json={"decision": "unsure"})
        assert resp.status_code == 409

    def test_verdict_validation_400(self, client):
        api, _ = client
        resp = api.post("/items/1:A1:B2/verdict", json={"decision": "incorrect"})
        assert resp.status_code == 400
        resp = api.post("/items/1:A1:B2/verdict", json={"decision": "maybe"})
        assert resp.status_code == 400

    def test_report_and_batches(self, client):
        api, _ = client
        api.post("/items/1:A1:B2/verdict", json={"decision": "correct"})
        report = api.get("/report").json()
        assert report["correct"] == 1
        batch = api.post("/batches", json={"per_ptm": 30, "seed": 9}).json()
        assert all(i["status"] == "pending" for i in batch)
        assert len(batch) == 2
