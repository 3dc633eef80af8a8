import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptmkit.normalization import NormalizedAbstract, normalize_document
from ptmkit.transform import (
    MaskingError,
    enumerate_pairs,
    mask_participants,
    sample_id_for,
    split_sample_id,
    transformed_from_json,
    truncate,
)

KB_PAIR = ("P04150", "P31749")


def na(text, proteins, pmid="1"):
    return NormalizedAbstract(pmid=pmid, text=text, proteins=frozenset(proteins))


class TestMaskParticipants:
    def test_worked_training_example(self, table1):
        normalized = normalize_document(table1["docs"][0], table1["mentions"], table1["map"], kb_pair=KB_PAIR)
        masked = mask_participants(normalized, ("P31749", "P04150"))
        # P04150 < P31749 lexicographically, so P04150 is PROTPART1
        assert (
            "PROTPART2 impairs glucocorticoid-induced gene expression by direct phosphorylation of PROTPART1"
            in masked.text
        )
        assert "loss of PRTIG1 and consequent PROTPART2" in masked.text
        for accession in ("P04150", "P31749", "P60484"):
            assert accession not in masked.text
        assert masked.sample_id == "24291004:P04150:P31749"

    def test_unordered_contract(self, table1):
        normalized = normalize_document(table1["docs"][0], table1["mentions"], table1["map"], kb_pair=KB_PAIR)
        assert mask_participants(normalized, ("P31749", "P04150")) == mask_participants(
            normalized, ("P04150", "P31749")
        )

    def test_no_bystanders_no_prtig(self):
        masked = mask_participants(na("A1 binds B2", {"A1", "B2"}), ("A1", "B2"))
        assert masked.text == "PROTPART1 binds PROTPART2"
        assert "PRTIG" not in masked.text

    def test_prtig_numbering_by_first_occurrence(self):
        # oracle: first occurrences scan left to right -> X, Y, Z
        text = "Z9 then X7 meets A1 and Y8 before X7 and B2"
        masked = mask_participants(na(text, {"A1", "B2", "X7", "Y8", "Z9"}), ("A1", "B2"))
        assert masked.text == "PRTIG1 then PRTIG2 meets PROTPART1 and PRTIG3 before PRTIG2 and PROTPART2"

    def test_every_occurrence_replaced(self):
        masked = mask_participants(na("A1 A1 B2 A1", {"A1", "B2"}), ("A1", "B2"))
        assert masked.text == "PROTPART1 PROTPART1 PROTPART2 PROTPART1"

    def test_whole_token_boundaries(self):
        # P1 must not corrupt the longer identifier P12
        masked = mask_participants(na("P1 binds P12 and P1x stays", {"P1", "P12"}), ("P1", "P12"))
        assert masked.text == "PROTPART1 binds PROTPART2 and P1x stays"

    def test_missing_participant(self):
        with pytest.raises(MaskingError, match="B2"):
            mask_participants(na("only A1 here", {"A1"}), ("A1", "B2"))

    def test_identical_pair_rejected(self):
        with pytest.raises(MaskingError):
            mask_participants(na("A1", {"A1"}), ("A1", "A1"))

    def test_json_roundtrip(self):
        masked = mask_participants(na("A1 binds B2", {"A1", "B2"}), ("A1", "B2"))
        import json

        assert transformed_from_json(json.loads(masked.to_json())) == masked


@settings(max_examples=50)
@given(
    accs=st.lists(st.from_regex(r"[PQ][0-9]{4}", fullmatch=True), min_size=2, max_size=6, unique=True)
)
def test_masking_symmetric_under_pair_order(accs):
    text = " ".join(accs) + " binds"
    abstract = na(text, set(accs))
    a, b = accs[0], accs[1]
    assert mask_participants(abstract, (a, b)) == mask_participants(abstract, (b, a))


class TestTruncate:
    def test_short_text_unchanged(self):
        assert truncate("one two three four five", 510) == "one two three four five"

    def test_twelve_tokens_budget_ten(self):
        words = [f"w{i}" for i in range(12)]
        text = " ".join(words)
        assert truncate(text, 10) == " ".join(words[:10])  # oracle: split/join

    def test_exact_budget(self):
        assert truncate("a b c", 3) == "a b c"

    def test_budget_one(self):
        assert truncate("alpha beta", 1) == "alpha"

    def test_custom_length_fn(self):
        # character-counting length function: longest prefix of <= 4 chars
        assert truncate("abcdefgh", 4, length_fn=len) == "abcd"

    def test_subword_style_length_fn(self):
        # a crude sub-word counter: every 3 characters of a token is one unit
        def units(text):
            return sum((len(t) + 2) // 3 for t in text.split())

        out = truncate("abcdef abc abcdef", 3, length_fn=units)
        assert units(out) <= 3 and out == "abcdef abc"[: len(out)]

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            truncate("x", 0)


class TestEnumeratePairs:
    def test_two_proteins_one_pair(self):
        assert enumerate_pairs(na("x", {"B", "A"})) == [("A", "B")]

    def test_zero_or_one_protein(self):
        assert enumerate_pairs(na("x", set())) == []
        assert enumerate_pairs(na("x", {"A"})) == []

    def test_four_proteins_match_brute_force(self):
        proteins = {"P1", "P2", "P3", "P4"}
        pairs = enumerate_pairs(na("x", proteins))
        brute = sorted({tuple(sorted((a, b))) for a in proteins for b in proteins if a != b})
        assert pairs == brute
        assert len(pairs) == 6

    @pytest.mark.parametrize("n", range(0, 51))
    def test_count_formula_all_n(self, n):
        proteins = {f"P{i:03d}" for i in range(n)}
        pairs = enumerate_pairs(na("x", proteins))
        assert len(pairs) == n * (n - 1) // 2
        assert all(a < b for a, b in pairs)


def test_sample_id_roundtrip():
    sid = sample_id_for("123", ("B2", "A1"))
    assert sid == "123:A1:B2"
    assert split_sample_id(sid) == ("123", ("A1", "B2"))
    with pytest.raises(ValueError):
        split_sample_id("junk")
