import io
import json
import random
from collections import defaultdict

import pytest

from ptmkit.aggregation import (
    aggregate_triplets,
    canonicalize,
    filter_multi_abstract,
    load_reference,
    read_triplets,
    recall_against_reference,
    write_triplets,
)
from ptmkit.calibration import PredictionRecord
from ptmkit.corpus_io import Interaction, N_CLASSES

PHOS = Interaction.PHOSPHORYLATION
METH = Interaction.METHYLATION


def pred(pmid, a, b, ptm=PHOS, conf=0.9, std=0.05):
    lo, hi = sorted((a, b))
    probs = [0.0] * N_CLASSES
    probs[ptm] = conf
    probs[Interaction.NEGATIVE] = 1 - conf
    return PredictionRecord(f"{pmid}:{lo}:{hi}", pmid, (lo, hi), tuple(probs), ptm, conf, std)


class TestCanonicalize:
    def test_ordering_rule(self):
        assert canonicalize("P31749", "P04150", PHOS) == ("P04150", PHOS, "P31749")

    def test_symmetry(self):
        for a, b in [("A", "B"), ("Q9", "P1"), ("X", "Y")]:
            assert canonicalize(a, b, METH) == canonicalize(b, a, METH)

    def test_ptm_part_of_key(self):
        assert canonicalize("A", "B", METH) != canonicalize("A", "B", PHOS)

    def test_self_relation_rejected(self):
        with pytest.raises(ValueError):
            canonicalize("A", "A", PHOS)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            canonicalize("A", "B", Interaction.NEGATIVE)


class TestAggregateTriplets:
    def test_counting_oracle(self):
        # 3 predictions of one triplet from 2 distinct pmids
        preds = [pred("1", "A", "B", conf=0.7), pred("1", "B", "A", conf=0.9), pred("2", "A", "B", conf=0.8)]
        triplets, stats = aggregate_triplets(preds)
        assert stats.total_predictions == 3
        assert stats.unique_triplets == 1
        assert triplets[0].n_abstracts == 2
        assert triplets[0].evidence["1"] == (0.9, 0.05)  # max-confidence entry kept

    def test_empty_stream(self):
        triplets, stats = aggregate_triplets([])
        assert triplets == [] and stats.total_predictions == 0

    def test_negative_predictions_skipped(self):
        triplets, stats = aggregate_triplets([pred("1", "A", "B", ptm=Interaction.NEGATIVE)])
        assert triplets == [] and stats.total_predictions == 0

    def test_unique_never_exceeds_total(self):
        rng = random.Random(1)
        preds = [
            pred(str(rng.randint(1, 5)), f"P{rng.randint(1, 4)}", f"Q{rng.randint(1, 4)}", conf=rng.random())
            for _ in range(500)
        ]
        _, stats = aggregate_triplets(preds)
        assert stats.unique_triplets <= stats.total_predictions

    def test_order_independence(self):
        rng = random.Random(7)
        preds = [
            pred(
                str(rng.randint(1, 8)),
                f"P{rng.randint(1, 5)}",
                f"Q{rng.randint(1, 5)}",
                ptm=rng.choice([PHOS, METH]),
                conf=round(rng.random(), 3),
                std=round(rng.random() * 0.3, 3),
            )
            for _ in range(300)
        ]
        base = [t.to_json() for t in aggregate_triplets(preds)[0]]
        for _ in range(10):
            shuffled = preds[:]
            rng.shuffle(shuffled)
            assert [t.to_json() for t in aggregate_triplets(shuffled)[0]] == base

    def test_brute_force_evidence_counts(self):
        rng = random.Random(3)
        preds = [
            pred(str(rng.randint(1, 20)), f"P{rng.randint(1, 6)}", f"Q{rng.randint(1, 6)}", conf=rng.random())
            for _ in range(1000)
        ]
        triplets, stats = aggregate_triplets(preds)
        brute = defaultdict(set)
        for p in preds:
            brute[(p.pair[0], p.pred_class, p.pair[1])].add(p.pmid)
        assert stats.unique_triplets == len(brute)
        for t in triplets:
            assert set(t.evidence) == brute[t.key]


class TestFilterMultiAbstract:
    def test_min_one_is_identity(self):
        triplets, _ = aggregate_triplets([pred("1", "A", "B")])
        assert filter_multi_abstract(triplets, 1) == triplets

    def test_single_abstract_removed_at_two(self):
        triplets, _ = aggregate_triplets([pred("1", "A", "B")])
        assert filter_multi_abstract(triplets, 2) == []

    def test_brute_force_on_synthetic_set(self):
        rng = random.Random(11)
        preds = [
            pred(str(rng.randint(1, 9)), f"P{rng.randint(1, 5)}", f"Q{rng.randint(1, 4)}")
            for _ in range(200)
        ]
        triplets, _ = aggregate_triplets(preds)
        for m in (1, 2, 3, 4):
            got = filter_multi_abstract(triplets, m)
            assert got == [t for t in triplets if len(t.evidence) >= m]

    def test_monotone_chain(self):
        rng = random.Random(13)
        preds = [pred(str(rng.randint(1, 6)), "A", "B") for _ in range(50)]
        preds += [pred(str(rng.randint(1, 3)), "C", "D") for _ in range(20)]
        triplets, _ = aggregate_triplets(preds)
        previous = triplets
        for m in (1, 2, 3, 4, 5, 6, 7):
            current = filter_multi_abstract(triplets, m)
            assert {t.key for t in current} <= {t.key for t in previous}
            previous = current

    def test_bad_min(self):
        with pytest.raises(ValueError):
            filter_multi_abstract([], 0)


class TestReferenceRecall:
    def test_reference_equals_predictions(self):
        triplets, _ = aggregate_triplets([pred("1", "A", "B"), pred("2", "C", "D", ptm=METH)])
        reference = {t.key for t in triplets}
        recall = recall_against_reference(triplets, reference)
        assert recall[PHOS.label] == (1, 1, 1.0)
        assert recall[METH.label] == (1, 1, 1.0)

    def test_disjoint_sets(self):
        triplets, _ = aggregate_triplets([pred("1", "A", "B")])
        recall = recall_against_reference(triplets, {("X", PHOS, "Y")})
        assert recall[PHOS.label] == (0, 1, 0.0)

    def test_empty_reference_ratio_zero(self):
        triplets, _ = aggregate_triplets([pred("1", "A", "B")])
        assert recall_against_reference(triplets, set())[PHOS.label] == (0, 0, 0.0)

    def test_load_reference_canonicalizes_and_counts_drops(self):
        tsv = "B\tphosphorylation\tA\n\tphosphorylation\tX\nA\tmethylation\tA\nA\tglycosylation\tB\nC\tMethylation\tD\n"
        keys, dropped = load_reference(io.BytesIO(tsv.encode()))
        assert keys == {("A", PHOS, "B"), ("C", METH, "D")}
        assert dropped == 3  # missing accession, self-relation, unknown ptm


def test_triplet_jsonl_roundtrip():
    preds = [pred("1", "A", "B", conf=0.8), pred("2", "A", "B", conf=0.9), pred("3", "C", "D", ptm=METH)]
    triplets, _ = aggregate_triplets(preds)
    text = "".join(write_triplets(triplets))
    lines = [json.loads(line) for line in text.splitlines()]
    assert lines[0]["n_abstracts"] == 2
    assert lines[0]["pmids"] == ["1", "2"]
    assert lines[0]["max_conf"] == 0.9
    back = read_triplets(io.BytesIO(text.encode()))
    assert [t.key for t in back] == [t.key for t in triplets]
    assert [t.n_abstracts for t in back] == [t.n_abstracts for t in triplets]
