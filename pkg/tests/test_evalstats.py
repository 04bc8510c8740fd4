"""Rating adjustment, ANOVA against closed-form oracles, session metrics."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from baisim import decoder, dialogue, evalstats
from baisim.errors import EmptyGroup, EmptyInput, ParseError


def test_adjustment_factors_exact():
    f = evalstats.ADJUSTMENT_FACTORS
    assert f["SlightlyDifferent"] == 1.0
    assert f["TooBrief"] == 0.9
    assert f["MissedDetails"] == 2.0 / 3.0
    assert f["AddedDetails"] == 0.5
    assert f["WrongInformation"] == 0.25
    assert f["TotallyDifferent"] == 0.1
    assert f["NoMistake"] == 1.0
    assert set(f) == set(evalstats.MISTAKE_KINDS)


def test_adjusted_rating_examples():
    rec = evalstats.RatingRecord("m", 4, "AddedDetails")
    assert evalstats.adjusted_rating(rec) == 2.0
    assert evalstats.adjusted_rating(evalstats.RatingRecord("m", 3, "MissedDetails")) == (
        pytest.approx(2.0)
    )
    assert evalstats.adjusted_rating(evalstats.RatingRecord("m", 5, "NoMistake")) == 5.0


def test_rating_record_validation():
    with pytest.raises(ValueError):
        evalstats.RatingRecord("m", 0, "NoMistake")
    with pytest.raises(ValueError):
        evalstats.RatingRecord("m", 6, "NoMistake")
    with pytest.raises(ValueError):
        evalstats.RatingRecord("m", 3, "Sloppy")
    with pytest.raises(ValueError):
        evalstats.RatingRecord("m", 5, "TooBrief")


def test_summarize_mean_and_sample_sd():
    records = [
        evalstats.RatingRecord("a", 3, "NoMistake"),
        evalstats.RatingRecord("a", 5, "NoMistake"),
        evalstats.RatingRecord("b", 4, "AddedDetails"),
    ]
    summaries = {s.model_tag: s for s in evalstats.summarize(records)}
    a = summaries["a"]
    assert a.n == 2
    assert a.mean_raw == 4.0
    assert a.sd_raw == pytest.approx(math.sqrt(2.0))  # n-1 denominator
    b = summaries["b"]
    assert b.n == 1
    assert b.sd_raw == 0.0  # singleton group reports zero spread
    assert b.mean_adjusted == 2.0
    with pytest.raises(EmptyGroup):
        evalstats.summarize([])


def test_summaries_sorted_and_formatted():
    records = [
        evalstats.RatingRecord("zeta", 4, "NoMistake"),
        evalstats.RatingRecord("alpha", 2, "TooBrief"),
    ]
    out = evalstats.format_summaries(evalstats.summarize(records))
    lines = out.splitlines()
    assert lines[0].startswith("alpha: n=1 raw=2.0000")
    assert lines[1].startswith("zeta: n=1 raw=4.0000")
    assert "adjusted=1.8000" in lines[0]


# -- ANOVA -----------------------------------------------------------------------


def t2_upper_p(t_squared, df):
    """Closed-form two-sided t-test p for F = t^2 with (1, df) degrees of
    freedom, via CDF(t) = 1/2 + t / (2*sqrt(t^2 + df)) for df = 2."""
    assert df == 2
    t = math.sqrt(t_squared)
    cdf = 0.5 + t / (2.0 * math.sqrt(t * t + 2.0))
    return 2.0 * (1.0 - cdf)


def test_anova_two_small_groups_against_t_oracle():
    # {1,2} vs {3,4}: grand mean 2.5, SSB = 2*(1.5-2.5)^2 + ... = 4,
    # SSW = 0.5 + 0.5 = 1, F = (4/1)/(1/2) = 8.
    f, p = evalstats.one_way_anova([[1, 2], [3, 4]])
    assert f == pytest.approx(8.0, abs=1e-12)
    assert p == pytest.approx(t2_upper_p(8.0, 2), abs=1e-12)
    assert p == pytest.approx(0.10557280900008412, abs=1e-9)


def test_anova_f_equals_t_squared():
    # Two-group ANOVA is algebraically the square of the pooled t-test.
    a = [1.0, 2.5, 3.0, 4.5]
    b = [2.0, 4.0, 5.5, 6.0]
    f, _ = evalstats.one_way_anova([a, b])
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    var_a = sum((v - ma) ** 2 for v in a) / (na - 1)
    var_b = sum((v - mb) ** 2 for v in b) / (nb - 1)
    pooled = ((na - 1) * var_a + (nb - 1) * var_b) / (na + nb - 2)
    t = (ma - mb) / math.sqrt(pooled * (1 / na + 1 / nb))
    assert f == pytest.approx(t * t, abs=1e-9)


def test_anova_identical_groups():
    f, p = evalstats.one_way_anova([[2, 2, 2], [2, 2, 2]])
    assert f == 0.0
    assert p == 1.0


def test_anova_equal_means_with_spread():
    f, p = evalstats.one_way_anova([[1, 3], [3, 1]])
    assert f == 0.0
    assert p == 1.0


def test_anova_complete_separation_sentinel():
    f, p = evalstats.one_way_anova([[1, 1], [2, 2]])
    assert f == math.inf
    assert p == 0.0


def test_anova_guards():
    with pytest.raises(EmptyGroup):
        evalstats.one_way_anova([[1, 2]])
    with pytest.raises(EmptyGroup):
        evalstats.one_way_anova([[1, 2], []])
    with pytest.raises(EmptyGroup):
        evalstats.one_way_anova([[1], [2]])  # zero within-group dof


@given(
    shift=st.floats(-50, 50, allow_nan=False),
    scale=st.floats(0.1, 20, allow_nan=False),
)
def test_anova_shift_scale_invariance(shift, scale):
    base = [[1.0, 2.0, 4.0], [2.5, 3.5, 6.0], [0.5, 1.5, 2.0]]
    f0, p0 = evalstats.one_way_anova(base)
    moved = [[scale * v + shift for v in g] for g in base]
    f1, p1 = evalstats.one_way_anova(moved)
    assert f1 == pytest.approx(f0, rel=1e-12, abs=1e-12)
    assert p1 == pytest.approx(p0, rel=1e-9, abs=1e-12)


def test_anova_three_groups_monotone_p():
    # Pushing one group further from the rest increases F, decreases p.
    near = evalstats.one_way_anova([[1, 2], [2, 3], [3, 4]])
    far = evalstats.one_way_anova([[1, 2], [2, 3], [30, 40]])
    assert far[0] > near[0]
    assert far[1] < near[1]


# -- ratings CSV -----------------------------------------------------------------


def test_parse_ratings_with_and_without_header():
    body = "a,4,NoMistake\nb,3,TooBrief\n"
    with_header = "model_tag,rating,mistake\n" + body
    assert evalstats.parse_ratings(with_header) == evalstats.parse_ratings(body)
    records = evalstats.parse_ratings(body)
    assert records[0] == evalstats.RatingRecord("a", 4, "NoMistake")


def test_parse_ratings_roundtrip():
    records = [
        evalstats.RatingRecord("ft-xl", 5, "NoMistake"),
        evalstats.RatingRecord("ft-cr", 2, "WrongInformation"),
    ]
    assert evalstats.parse_ratings(evalstats.format_ratings(records)) == records


def test_parse_ratings_rejects_malformed():
    with pytest.raises(ParseError):
        evalstats.parse_ratings("a,4\n")
    with pytest.raises(ParseError):
        evalstats.parse_ratings("a,4,NoMistake\nb,abc,TooBrief\n")
    with pytest.raises(EmptyInput):
        evalstats.parse_ratings("\n\n")


# -- session metrics ----------------------------------------------------------------


def test_selection_time_from_frames():
    assert evalstats.selection_time_ms(44) == 2400
    assert evalstats.selection_time_ms(217) == 11050
    assert evalstats.selection_time_ms(16) == 1000


def test_session_metrics_from_transcript_and_logs():
    w = dialogue.TranscriptWriter()
    w.scenario_header("EVAL", "g")
    w.question("q1")
    w.options(("a", "b", "c", "d", "e", "f"), 0, chosen=dialogue.Selection.keyword(2))
    w.answer("c.")
    w.question("q2")
    w.options(("a", "b", "c", "d", "e", "f"), 0, chosen=dialogue.MORE_OR_PREVIOUS)
    w.options(("g", "h", "i", "j", "k", "l"), 1, chosen=dialogue.Selection.keyword(0))
    w.answer("g.")
    w.question("q3")
    w.options(("a", "b", "c", "d", "e", "f"), 0, chosen=dialogue.FINISHED)
    w.answer(dialogue.FINISHED_REPLY)
    w.separator()

    records = [
        decoder.TrialLogRecord(frame_index=16, bit=1, accuracies=(0.0,) * 10, decided=False),
        decoder.TrialLogRecord(frame_index=43, bit=1, accuracies=(0.0,) * 10, decided=True),
        decoder.TrialLogRecord(frame_index=19, bit=0, accuracies=(0.0,) * 10, decided=True),
    ]
    metrics = evalstats.session_metrics(w.text(), records, accuracy=0.9)
    assert metrics.selection_times_ms == (2400, 1200)
    # Positions count keywords only: page 0 slot 2 -> 3, page 1 slot 0 -> 7.
    # More and Finished are excluded.
    assert metrics.keyword_positions == (3, 7)
    assert metrics.accuracy == 0.9


def test_histogram_bins():
    counts = evalstats.histogram([1, 1, 2, 12, 13], list(range(1, 14)))
    assert counts[0] == 2  # [1, 2)
    assert counts[1] == 1
    assert counts[11] == 2  # [12, 13] right-closed last bin
    assert sum(counts) == 5


def test_format_metrics_report():
    metrics = evalstats.SessionMetrics(
        selection_times_ms=(1000, 2000),
        keyword_positions=(1, 1, 7),
        accuracy=None,
    )
    report = evalstats.format_metrics_report(metrics, chance_level=0.1)
    assert "selections=2" in report
    assert "mean_selection_time_ms=1500.0" in report
    assert "keyword_position_counts=2,0,0,0,0,0,1,0,0,0,0,0" in report
    assert "chance_level=0.1000" in report
    assert "accuracy" not in report
