import pytest

from chatseg.eval import JudgeScores, StubJudge, judge_reasoning, parse_score, win_rate

DIALOGUE = [
    {"role": "user", "text": "what stands out?"},
    {"role": "assistant", "text": "the red circle."},
    {"role": "user", "text": "please segment it"},
]
RESPONSE = "the region to segment is [OBJ] red circle [SEG] ."


class TestParseScore:
    def test_plain_integer(self):
        assert parse_score("4") == 4

    def test_integer_in_prose(self):
        assert parse_score("I would rate this 3 out of 5") == 3

    def test_out_of_range_rejected(self):
        assert parse_score("42") is None

    def test_garbage_rejected(self):
        assert parse_score("n/a") is None
        assert parse_score("") is None


class TestJudgeReasoning:
    def test_constant_stub_scores(self):
        scores = judge_reasoning(DIALOGUE, RESPONSE, StubJudge(4))
        assert (scores.pr, scores.lc, scores.cc, scores.tr) == (4.0, 4.0, 4.0, 4.0)
        assert scores.overall == 4.0
        assert not scores.unscored

    def test_sequence_mean(self):
        script = {m: ["3", "4", "5", "4", "4"] for m in ("pr", "lc", "cc", "tr")}
        scores = judge_reasoning(DIALOGUE, RESPONSE, StubJudge(script))
        assert scores.pr == pytest.approx(4.0)
        assert scores.repeats["pr"] == [3, 4, 5, 4, 4]

    def test_reported_mean_equals_mean_of_repeats(self):
        script = {m: ["1", "2", "3", "4", "5"] for m in ("pr", "lc", "cc", "tr")}
        scores = judge_reasoning(DIALOGUE, RESPONSE, StubJudge(script))
        for metric in ("pr", "lc", "cc", "tr"):
            repeats = scores.repeats[metric]
            assert getattr(scores, metric) == sum(repeats) / len(repeats)

    def test_malformed_repeats_are_retried_then_dropped(self):
        # each malformed reply consumes a retry; 3 bad pairs + 2 good -> 2 valid < 3
        script = {m: ["4"] * 5 for m in ("lc", "cc", "tr")}
        script["pr"] = ["n/a", "n/a", "n/a", "n/a", "n/a", "n/a", "4", "4"]
        scores = judge_reasoning(DIALOGUE, RESPONSE, StubJudge(script))
        assert scores.unscored
        assert scores.pr is None
        assert scores.overall is None
        assert scores.lc == 4.0

    def test_single_malformed_repeat_recovers_via_retry(self):
        script = {m: ["4"] * 5 for m in ("pr", "lc", "cc", "tr")}
        script["pr"] = ["bad", "5", "4", "4", "4", "3"]  # retry of repeat 1 yields 5
        scores = judge_reasoning(DIALOGUE, RESPONSE, StubJudge(script))
        assert not scores.unscored
        assert scores.repeats["pr"] == [5, 4, 4, 4, 3]
        assert scores.pr == 4.0


class TestWinRate:
    def test_model_always_higher(self):
        report = win_rate([5.0] * 10, [4.0] * 10)
        assert report.win_rate == 100.0
        assert report.wins == 10 and report.ties == 0

    def test_all_ties(self):
        report = win_rate([3.0] * 8, [3.0] * 8)
        assert report.wins == 0 and report.ties == 8
        assert report.win_rate == 0.0

    def test_42_of_100(self):
        model = [4.5] * 42 + [3.0] * 58
        human = [4.0] * 100
        report = win_rate(model, human)
        assert report.win_rate == pytest.approx(42.0)
        assert report.to_dict()["wins"] == 42

    def test_ties_stay_in_denominator(self):
        report = win_rate([5.0, 4.0, 3.0], [4.0, 4.0, 4.0])
        assert report.wins == 1 and report.ties == 1 and report.losses == 1
        assert report.win_rate == pytest.approx(100 / 3)

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            win_rate([1.0], [1.0, 2.0])


class TestJudgeScores:
    def test_overall_requires_all_metrics(self):
        scores = JudgeScores(pr=4.0, lc=4.0, cc=None, tr=4.0)
        assert scores.overall is None
