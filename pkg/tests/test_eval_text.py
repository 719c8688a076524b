import math

import pytest

from chatseg.eval import bleu4, dist_n, light_stem, meteor_v, rouge_l, text_metrics


class TestBleu4:
    def test_identity_is_one(self):
        s = "the quick brown fox jumps over the lazy dog"
        assert bleu4(s, [s]) == pytest.approx(1.0)

    def test_hand_computed_example(self):
        # pred/ref differ in one word; n-gram precisions 5/6, 3/5, 2/4, 1/3
        pred = "the cat sat on the mat"
        ref = "the cat sat on a mat"
        expected = (5 / 6 * 3 / 5 * 2 / 4 * 1 / 3) ** 0.25
        assert bleu4(pred, [ref]) == pytest.approx(expected, abs=1e-9)

    def test_disjoint_strings_score_zero(self):
        assert bleu4("alpha beta gamma delta", ["one two three four"]) == 0.0

    def test_brevity_penalty(self):
        # identical 4-gram content but the pred is a strict prefix of the ref
        pred = "a b c d"
        ref = "a b c d e f g h"
        val = bleu4(pred, [ref])
        assert val == pytest.approx(math.exp(1 - 8 / 4), abs=1e-9)

    def test_short_prediction_scores_zero(self):
        assert bleu4("only three words", ["only three words"]) == 0.0  # no 4-grams

    def test_range(self):
        assert 0.0 <= bleu4("a b c d e", ["a b x d e"]) <= 1.0


class TestRougeL:
    def test_identity_is_one(self):
        s = "segment the red circle now"
        assert rouge_l(s, [s]) == pytest.approx(1.0)

    def test_hand_computed_lcs(self):
        # LCS("the cat sat on the mat", "the cat sat on a mat") = 5 tokens
        val = rouge_l("the cat sat on the mat", ["the cat sat on a mat"])
        p, r = 5 / 6, 5 / 6
        assert val == pytest.approx(2 * p * r / (p + r), abs=1e-9)

    def test_disjoint_zero(self):
        assert rouge_l("alpha beta", ["gamma delta"]) == 0.0

    def test_best_reference_wins(self):
        pred = "a b c"
        assert rouge_l(pred, ["z z z", "a b c"]) == pytest.approx(1.0)


class TestDistN:
    def test_repeated_unigram(self):
        assert dist_n("a a a a", 1) == pytest.approx(0.25)

    def test_repeated_bigram(self):
        assert dist_n("a a a a", 2) == pytest.approx(1 / 3)

    def test_all_distinct_is_one(self):
        assert dist_n("one two three four", 1) == 1.0
        assert dist_n("one two three four", 2) == 1.0

    def test_too_short_returns_zero(self):
        assert dist_n("word", 2) == 0.0


class TestMeteorVariant:
    def test_stemmer(self):
        assert light_stem("cats") == "cat"
        assert light_stem("running") == "runn"
        assert light_stem("jumped") == "jump"
        assert light_stem("is") == "is"  # too short to strip

    def test_hand_computed_stem_match(self):
        # all three unigrams match (one via stemming), single chunk:
        # F = 1, penalty = 0.5 * (1/3)^3
        val = meteor_v("the cats sat", ["the cat sat"])
        assert val == pytest.approx(1.0 - 0.5 * (1 / 3) ** 3, abs=1e-9)

    def test_fragmentation_penalty(self):
        # "c a b" vs "a b c": matches (c), (a b) -> 2 chunks of 3 matches
        val = meteor_v("c a b", ["a b c"])
        assert val == pytest.approx(1.0 - 0.5 * (2 / 3) ** 3, abs=1e-9)
        # "b a c" aligns as three isolated matches -> full penalty
        val = meteor_v("b a c", ["a b c"])
        assert val == pytest.approx(1.0 - 0.5 * (3 / 3) ** 3, abs=1e-9)

    def test_disjoint_zero(self):
        assert meteor_v("alpha beta", ["gamma delta"]) == 0.0

    def test_recall_weighting(self):
        # pred covers half the ref exactly: P = 1, R = 0.5
        val = meteor_v("a b", ["a b c d"])
        f = 10 * 1.0 * 0.5 / (0.5 + 9 * 1.0)
        assert val == pytest.approx(f * (1 - 0.5 * (1 / 2) ** 3), abs=1e-9)


class TestTextMetricsBundle:
    def test_identity_bundle(self):
        s = "the red circle sits in the top left corner of it"
        scores = text_metrics(s, [s])
        assert scores["bleu4"] == pytest.approx(1.0)
        assert scores["rougeL"] == pytest.approx(1.0)

    def test_empty_prediction_scores_zero(self):
        scores = text_metrics("", ["anything"])
        assert all(v == 0.0 for v in scores.values())

    def test_all_in_unit_interval(self):
        preds = ["a b a b a", "the mat sat", "totally different words here now"]
        refs = ["a b c d e", "the cat sat on the mat"]
        for pred in preds:
            for value in text_metrics(pred, refs).values():
                assert 0.0 <= value <= 1.0
