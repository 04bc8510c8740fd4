"""Rating adjustment, group summaries, one-way ANOVA, and session metrics.

Rater scores (1..5) are multiplied by a mistake-dependent penalty factor.
Group comparisons use a one-way ANOVA with the p-value computed from the
F distribution's upper tail via the regularized incomplete beta function.
Session metrics turn transcripts and trial logs into selection times and a
keyword-position histogram.
"""

import csv
import io
import math
from dataclasses import dataclass

from scipy.special import betainc

from .decoder import ACQUISITION_TAIL_MS
from .dialogue import KEYWORDS_PER_PAGE, parse_transcript
from .errors import EmptyGroup, EmptyInput, ParseError

MISTAKE_KINDS = (
    "SlightlyDifferent",
    "TooBrief",
    "MissedDetails",
    "AddedDetails",
    "WrongInformation",
    "TotallyDifferent",
    "NoMistake",
)

ADJUSTMENT_FACTORS = {
    "SlightlyDifferent": 1.0,
    "TooBrief": 0.9,
    "MissedDetails": 2.0 / 3.0,
    "AddedDetails": 0.5,
    "WrongInformation": 0.25,
    "TotallyDifferent": 0.1,
    "NoMistake": 1.0,
}


@dataclass(frozen=True)
class RatingRecord:
    model_tag: str
    rating: int
    mistake: str

    def __post_init__(self):
        if not 1 <= self.rating <= 5:
            raise ValueError(f"rating must be 1..5, got {self.rating}")
        if self.mistake not in ADJUSTMENT_FACTORS:
            raise ValueError(f"unknown mistake kind {self.mistake!r}")
        if self.rating == 5 and self.mistake != "NoMistake":
            raise ValueError("a perfect rating cannot carry a mistake")


def adjustment_factor(mistake):
    return ADJUSTMENT_FACTORS[mistake]


def adjusted_rating(record):
    return record.rating * ADJUSTMENT_FACTORS[record.mistake]


@dataclass(frozen=True)
class GroupSummary:
    model_tag: str
    n: int
    mean_raw: float
    sd_raw: float
    mean_adjusted: float
    sd_adjusted: float


def _mean_sd(values):
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def summarize(records):
    """Per-model mean and sample (n-1) standard deviation, raw and adjusted."""
    groups = {}
    for rec in records:
        groups.setdefault(rec.model_tag, []).append(rec)
    if not groups:
        raise EmptyGroup("no rating records")
    summaries = []
    for tag in sorted(groups):
        recs = groups[tag]
        raw = [float(r.rating) for r in recs]
        adj = [adjusted_rating(r) for r in recs]
        mean_raw, sd_raw = _mean_sd(raw)
        mean_adj, sd_adj = _mean_sd(adj)
        summaries.append(GroupSummary(tag, len(recs), mean_raw, sd_raw, mean_adj, sd_adj))
    return summaries


def format_summaries(summaries):
    lines = []
    for s in summaries:
        lines.append(
            f"{s.model_tag}: n={s.n} "
            f"raw={s.mean_raw:.4f}+/-{s.sd_raw:.4f} "
            f"adjusted={s.mean_adjusted:.4f}+/-{s.sd_adjusted:.4f}"
        )
    return "\n".join(lines) + "\n"


def one_way_anova(groups):
    """(F, p) over k groups.

    p is the upper tail of F(df_between, df_within), computed as the
    regularized incomplete beta I_x(df_within/2, df_between/2) at
    x = df_within / (df_within + df_between * F).  Zero within-group variance
    with distinct means means complete separation: (inf, 0) sentinel.
    """
    groups = [list(map(float, g)) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise EmptyGroup("ANOVA needs at least two nonempty groups")
    n_total = sum(len(g) for g in groups)
    df_between = len(groups) - 1
    df_within = n_total - len(groups)
    if df_within < 1:
        raise EmptyGroup("ANOVA needs at least one within-group degree of freedom")
    grand = sum(sum(g) for g in groups) / n_total
    ss_between = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups)
    ss_within = sum(sum((v - sum(g) / len(g)) ** 2 for v in g) for g in groups)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return 0.0, 1.0  # every value identical, nothing to separate
        return math.inf, 0.0
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    x = df_within / (df_within + df_between * f_stat)
    p = float(betainc(df_within / 2.0, df_between / 2.0, x))
    return f_stat, p


def parse_ratings(text):
    """Comma-separated rows: model_tag, rating, mistake (header optional)."""
    records = []
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ParseError(f"ratings row needs 3 fields, got {row!r}")
        tag, rating, mistake = (cell.strip() for cell in row)
        if not rating.isdigit():
            if records:
                raise ParseError(f"bad rating value {rating!r}")
            continue  # header row
        try:
            records.append(RatingRecord(tag, int(rating), mistake))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    if not records:
        raise EmptyInput("no rating rows")
    return records


def format_ratings(records):
    lines = ["model_tag,rating,mistake"]
    lines += [f"{r.model_tag},{r.rating},{r.mistake}" for r in records]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# session metrics

@dataclass(frozen=True)
class SessionMetrics:
    selection_times_ms: tuple
    keyword_positions: tuple  # 1..12, specials excluded
    accuracy: float = None  # only known when intended targets are


def selection_time_ms(frames_to_decision):
    return frames_to_decision * 50 + ACQUISITION_TAIL_MS


def session_metrics(transcript_text, trial_records, accuracy=None):
    """Selection times from the trial logs, keyword positions from the
    transcript's marked options."""
    times = []
    for rec in trial_records:
        if rec.decided:
            times.append(selection_time_ms(rec.frame_index + 1))
    positions = []
    for scenario in parse_transcript(transcript_text):
        for turn in scenario["turns"]:
            for kw_line in turn["kw_lines"]:
                chosen = kw_line["chosen"]
                if chosen is not None and chosen < KEYWORDS_PER_PAGE:
                    positions.append(kw_line["page"] * KEYWORDS_PER_PAGE + chosen + 1)
    return SessionMetrics(
        selection_times_ms=tuple(times),
        keyword_positions=tuple(positions),
        accuracy=accuracy,
    )


def histogram(values, edges):
    """Counts per [edges[i], edges[i+1]) bin, last bin right-closed."""
    counts = [0] * (len(edges) - 1)
    for v in values:
        for i in range(len(counts)):
            last = i == len(counts) - 1
            if edges[i] <= v < edges[i + 1] or (last and v == edges[-1]):
                counts[i] += 1
                break
    return counts


def format_metrics_report(metrics, chance_level=None):
    lines = []
    times = metrics.selection_times_ms
    if times:
        lines.append(f"selections={len(times)}")
        lines.append(f"mean_selection_time_ms={sum(times) / len(times):.1f}")
    else:
        lines.append("selections=0")
    positions = metrics.keyword_positions
    counts = histogram(positions, list(range(1, 14))) if positions else [0] * 12
    lines.append("keyword_position_counts=" + ",".join(str(c) for c in counts))
    if metrics.accuracy is not None:
        lines.append(f"accuracy={metrics.accuracy:.4f}")
    if chance_level is not None:
        lines.append(f"chance_level={chance_level:.4f}")
    return "\n".join(lines) + "\n"
