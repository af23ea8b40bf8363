import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SROIE_GT, SROIE_OCR
from indocr.metrics import (
    FREEFORM_POLICY,
    ExtractionScore,
    aggregate_dataset,
    anls,
    edit_distance,
    exact_match,
    free_form_match,
    normalized_distance,
    percentage_match_field,
    score_extraction,
)
from indocr.schemas import FieldRecord
from indocr.text import NormalizationPolicy, SegmentUnit, normalize, segment
from oracles import levenshtein_recursive

short_seqs = st.lists(st.sampled_from("abcd"), max_size=8)


class TestEditDistance:
    def test_identity(self):
        assert edit_distance(["a", "b"], ["a", "b"]) == 0

    def test_insertions(self):
        assert edit_distance([], ["x", "y", "z"]) == 3
        assert edit_distance(["x", "y", "z"], []) == 3

    def test_kitten(self):
        # oracle: levenshtein_recursive("kitten", "sitting") == 3
        assert edit_distance("kitten", "sitting") == 3

    def test_word_tokens(self):
        assert edit_distance("the cat sat".split(), "the bat sat down".split()) == 2

    def test_long_sequences_cross_word_boundary(self):
        # patterns longer than 64 symbols exercise multi-limb bit vectors
        rng = random.Random(7)
        for _ in range(5):
            a = [rng.choice("abc") for _ in range(rng.randint(60, 140))]
            b = [rng.choice("abc") for _ in range(rng.randint(60, 140))]
            assert edit_distance(a, b) == levenshtein_recursive(a, b)

    @given(short_seqs, short_seqs)
    def test_matches_oracle(self, a, b):
        assert edit_distance(a, b) == levenshtein_recursive(a, b)

    @given(short_seqs, short_seqs)
    def test_symmetric(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(short_seqs, short_seqs, short_seqs)
    def test_triangle(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestNormalizedDistance:
    def test_equal(self):
        assert normalized_distance("abc", "abc") == 0.0

    def test_full_deletion(self):
        assert normalized_distance("ab", "") == 1.0

    def test_both_empty(self):
        assert normalized_distance("", "") == 0.0

    def test_kitten(self):
        assert normalized_distance("kitten", "sitting") == pytest.approx(3 / 7)

    @given(short_seqs, short_seqs)
    def test_bounds_and_symmetry(self, a, b):
        d = normalized_distance(a, b)
        assert 0.0 <= d <= 1.0
        assert d == normalized_distance(b, a)
        assert (d == 0.0) == (a == b)

    @given(st.lists(st.sampled_from("ab"), min_size=1, max_size=8),
           st.lists(st.sampled_from("cd"), min_size=1, max_size=8))
    def test_disjoint_alphabets_score_one(self, a, b):
        assert normalized_distance(a, b) == 1.0


class TestAnls:
    def test_identical_pairs(self):
        pairs = [(normalize("नमस्ते"), normalize("नमस्ते")), (normalize("a b"), normalize("a b"))]
        for unit in SegmentUnit:
            assert anls(pairs, unit).scaled == 0.0

    def test_mean_of_pairs(self):
        pairs = [(normalize("abc"), normalize("abc")), (normalize("xy"), normalize(""))]
        s = anls(pairs, "codepoint")
        assert s.scaled == 50.0
        assert s.n_pairs == 2

    def test_no_samples(self):
        with pytest.raises(ValueError, match="no samples"):
            anls([], "word")

    def test_word_vs_char(self):
        pairs = [(normalize("the cat"), normalize("the bat"))]
        assert anls(pairs, "word").value == pytest.approx(0.5)
        assert anls(pairs, "codepoint").value == pytest.approx(1 / 7)

    def test_grapheme_unit_differs_from_codepoint(self):
        # कि vs कु: one grapheme substituted out of one; one code point out of two
        pairs = [(normalize("कि"), normalize("कु"))]
        assert anls(pairs, "grapheme").value == 1.0
        assert anls(pairs, "codepoint").value == 0.5

    @pytest.mark.parametrize("unit", list(SegmentUnit))
    def test_random_corpus_matches_oracle(self, unit):
        rng = random.Random(2024)
        alphabet = ["a", "b", "क", "ि", " ", "త", "ె"]
        pairs, expected = [], []
        for _ in range(100):
            p = normalize("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8))))
            r = normalize("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8))))
            a, b = segment(p, unit), segment(r, unit)
            longest = max(len(a), len(b))
            expected.append(levenshtein_recursive(a, b) / longest if longest else 0.0)
            pairs.append((p, r))
        assert anls(pairs, unit).value == pytest.approx(sum(expected) / 100, abs=1e-12)


class TestFieldMetrics:
    def test_trailing_space(self):
        assert exact_match("ABCDE1234F ", "ABCDE1234F") == 1

    def test_punctuation_differs(self):
        assert exact_match("15/01/2019", "15-01-2019") == 0

    def test_case_fold_match(self):
        p = NormalizationPolicy(case_fold=True)
        assert exact_match("OJC Marketing SDN BHD", "OJC MARKETING SDN BHD", p) == 1
        assert exact_match("OJC Marketing SDN BHD", "OJC MARKETING SDN BHD") == 0

    def test_pm_identical(self):
        assert percentage_match_field("MH12AB1234", "MH12AB1234") == 1.0

    def test_pm_empty_pred(self):
        assert percentage_match_field("", "Pune") == 0.0

    def test_pm_address(self):
        # oracle distance 1, longer length 18
        assert percentage_match_field("81750 MASAI JOHOR", "81750 MASAI, JOHOR") == pytest.approx(1 - 1 / 18)

    @given(st.text(max_size=12), st.text(max_size=12))
    def test_em_implies_pm(self, a, b):
        em = exact_match(a, b)
        pm = percentage_match_field(a, b)
        assert 0.0 <= pm <= 1.0
        assert pm >= em
        if em:
            assert pm == 1.0


def rec(values, doc_type="pan"):
    return FieldRecord(doc_type, dict(values))


class TestScoreExtraction:
    ref = rec({"Person Name": "RAVI KUMAR", "Pan Number": "ABCDE1234F", "DOB": "01/02/1990"})

    def test_perfect(self):
        s = score_extraction(self.ref, self.ref)
        assert (s.doc_em, s.doc_pm, s.mean, s.spurious_fields) == (100.0, 100.0, 100.0, 0)

    def test_missing_field(self):
        ref = rec({"Person Name": "A", "Address": "B", "Pin Code": "1", "State": "X"}, "aadhaar")
        pred = rec({"Person Name": "A", "Address": "B", "Pin Code": "1"}, "aadhaar")
        s = score_extraction(pred, ref)
        assert s.doc_em == 75.0
        assert s.doc_pm == 75.0

    def test_spurious_counted_not_scored(self):
        pred = rec({**self.ref.values, "Father Name": "X"})
        s = score_extraction(pred, self.ref)
        assert s.doc_em == 100.0
        assert s.spurious_fields == 1

    def test_keys_trimmed(self):
        ref = rec({"Regn. No ": "MH12AB1234"}, "rc")
        pred = rec({"Regn. No": "MH12AB1234"}, "rc")
        assert score_extraction(pred, ref).doc_em == 100.0

    def test_doc_type_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            score_extraction(rec({}, "aadhaar"), self.ref)

    def test_partial_pm(self):
        pred = rec({"Person Name": "RAVI KUMAR", "Pan Number": "ABCDE1234X", "DOB": "01/02/1990"})
        s = score_extraction(pred, self.ref)
        assert s.doc_em == pytest.approx(200 / 3)
        assert s.doc_pm == pytest.approx(100 * (2 + 0.9) / 3)
        assert s.mean == pytest.approx((s.doc_em + s.doc_pm) / 2)
        assert [f.em for f in s.per_field] == [1, 0, 1]

    def test_mean_identity_from_published_numbers(self):
        s = ExtractionScore(doc_em=82.13, doc_pm=90.83, mean=(82.13 + 90.83) / 2)
        assert f"{s.mean:.2f}" == "86.48"


class TestAggregate:
    def test_single(self):
        s = score_extraction(TestScoreExtraction.ref, TestScoreExtraction.ref)
        agg = aggregate_dataset([s])
        assert (agg.doc_em, agg.doc_pm, agg.mean) == (s.doc_em, s.doc_pm, s.mean)

    def test_two_documents(self):
        a = ExtractionScore(100.0, 100.0, 100.0)
        b = ExtractionScore(0.0, 0.0, 0.0)
        assert aggregate_dataset([a, b]).doc_em == 50.0

    def test_empty(self):
        with pytest.raises(ValueError, match="no documents"):
            aggregate_dataset([])

    def test_ten_documents_hand_computed(self):
        # PAN docs; k fields exact, and when k < 3 one extra field has a single
        # substitution in a 10-char value (pm 0.9); remaining fields omitted.
        # Hand totals: EM = 100*20/30, PM = 100*(20 + 6*0.9)/30, Mean = their average.
        values = ["AAAAAAAAAA", "BBBBBBBBBB", "CCCCCCCCCC"]
        keys = ["Person Name", "Pan Number", "DOB"]
        ref = rec(dict(zip(keys, values)))
        docs = []
        for k in [3, 2, 1, 0, 3, 3, 2, 1, 2, 3]:
            pred = {keys[i]: values[i] for i in range(k)}
            if k < 3:
                pred[keys[k]] = values[k][:-1] + "Z"
            docs.append(score_extraction(rec(pred), ref))
        agg = aggregate_dataset(docs)
        assert agg.doc_em == pytest.approx(200 / 3)
        assert agg.doc_pm == pytest.approx(254 / 3)
        assert agg.mean == pytest.approx(227 / 3)
        assert agg.n_documents == 10


class TestFreeFormMatch:
    def test_sroie_company_only(self):
        s = free_form_match(SROIE_GT, SROIE_OCR)
        assert s.matched_fields == ("company",)
        assert (s.matched, s.total) == (1, 4)
        assert s.percent == 25.0

    def test_case_sensitive_policy_misses(self):
        s = free_form_match(SROIE_GT, SROIE_OCR, NormalizationPolicy())
        assert s.matched == 0

    def test_all_present(self):
        text = "\n".join(SROIE_GT.values())
        assert free_form_match(SROIE_GT, text).percent == 100.0

    def test_minor_deviation_not_counted(self):
        s = free_form_match({"total": "193.00"}, "TOTAL 193.0 RM")
        assert s.matched == 0

    def test_empty_ocr(self):
        assert free_form_match(SROIE_GT, "").matched == 0
        assert free_form_match({"a": "", "b": "x"}, "").matched == 1

    def test_wrapped_lines_match(self):
        # line breaks in the OCR collapse to single spaces before containment
        s = free_form_match({"address": "JALAN BAYU 4, BANDAR SERI ALAM"}, "JALAN BAYU\n4, BANDAR SERI   ALAM")
        assert s.matched == 1

    def test_no_fields(self):
        with pytest.raises(ValueError):
            free_form_match({}, "x")

    @settings(max_examples=200)
    @given(st.text(max_size=30), st.text(max_size=20))
    def test_monotone_under_append(self, text, extra):
        # appended output starts on a new line, i.e. at a grapheme boundary
        gt = {"a": "abc", "b": "x y", "c": "Zz"}
        before = free_form_match(gt, text, FREEFORM_POLICY).percent
        after = free_form_match(gt, text + "\n" + extra, FREEFORM_POLICY).percent
        assert after >= before

    @given(st.text(max_size=30), st.text(alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=20))
    def test_monotone_under_ascii_append(self, text, extra):
        gt = {"a": "abc", "b": "x y", "c": "Zz"}
        before = free_form_match(gt, text).percent
        assert free_form_match(gt, text + extra).percent >= before

    def test_combining_append_can_compose(self):
        # a trailing combining accent composes with the last letter under NFC
        assert free_form_match({"a": "abc"}, "abc").matched == 1
        assert free_form_match({"a": "abc"}, "abc\u0301").matched == 0
