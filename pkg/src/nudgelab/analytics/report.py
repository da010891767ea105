"""Report rendering: descriptive and comparison tables in plain text plus
a machine-readable results document.

Output is deterministic: fixed column formats, stable ordering, no
wall-clock content, so two runs over the same input are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..errors import DegenerateInputError, ValidationFailure
from ..store import ExportRecord
from .inference import GroupComparison, GroupSummary, LeveneResult, levene_test, pooled_t_test, summarize
from .metrics import (
    ChangeKind,
    EditOutcome,
    MetricsConfig,
    UserMetrics,
    aggregate_counts,
    compute_user_metrics,
    detect_edit_changes,
)
from .survey import ConstructScore, ReliabilityResult, SurveyItemResponse, score_survey

#: Behavioral variables reported per group, in table order.
BEHAVIOR_VARIABLES = ("#EDITS", "#POSTS", "#SHARES", "#PUBLICATIONS")

_METRIC_FIELDS = {
    "#EDITS": "edits",
    "#POSTS": "posts",
    "#SHARES": "shares",
    "#PUBLICATIONS": "publications",
}


@dataclass(frozen=True)
class VariableComparison:
    """One table row; comparison is None when the variable is degenerate
    (zero pooled variance with unequal means admits no t statistic)."""

    variable: str
    group1: GroupSummary
    group2: GroupSummary
    comparison: GroupComparison | None
    levene: LeveneResult | None = None


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def render_report(
    rows: Sequence[VariableComparison],
    aggregates: Mapping[str, int] | None = None,
    reliability: Sequence[ReliabilityResult] = (),
    edit_outcomes: Sequence[EditOutcome] = (),
) -> str:
    """Plain-text report: descriptive table, then the t-test table, then
    optional aggregate counts, edit-change classification, and survey
    reliability."""
    lines: list[str] = []
    lines.append("Descriptive group statistics")
    lines.append(f"{'variable':<16} {'group':>5} {'n':>4} {'mean':>9} {'sd':>9} {'se':>9}")
    for row in rows:
        for label, g in (("1", row.group1), ("2", row.group2)):
            lines.append(
                f"{row.variable:<16} {label:>5} {g.n:>4} {_fmt(g.mean):>9}"
                f" {_fmt(g.sd):>9} {_fmt(g.se):>9}"
            )
    lines.append("")
    lines.append("Independent samples t-test (pooled variances, two-tailed)")
    lines.append(
        f"{'variable':<16} {'t':>8} {'df':>4} {'p':>7} {'sig':>4} {'diff':>8}"
        f" {'se_dm':>8} {'ci95_low':>9} {'ci95_high':>9} {'cohens_d':>9}"
    )
    for row in rows:
        c = row.comparison
        if c is None:
            lines.append(f"{row.variable:<16} (degenerate: zero pooled variance)")
            continue
        lines.append(
            f"{row.variable:<16} {_fmt(c.t):>8} {c.df:>4} {_fmt(c.p_two_tailed):>7}"
            f" {'*' if c.significant else '':>4} {_fmt(c.mean_diff):>8}"
            f" {_fmt(c.se_dm):>8} {_fmt(c.ci95[0]):>9} {_fmt(c.ci95[1]):>9}"
            f" {_fmt(c.cohens_d):>9}"
        )
    lines.append("(*) mean difference significant at alpha = 0.05")
    if any(row.levene is not None for row in rows):
        lines.append("")
        lines.append("Levene's test for equality of variances (mean-centered)")
        lines.append(f"{'variable':<16} {'W':>8} {'p':>7}")
        for row in rows:
            if row.levene is not None:
                lines.append(
                    f"{row.variable:<16} {_fmt(row.levene.w):>8} {_fmt(row.levene.p):>7}"
                )
    if aggregates:
        lines.append("")
        lines.append("Aggregate counts")
        lines.append(
            f"edits={aggregates['edits']} posts={aggregates['posts']}"
            f" shares={aggregates['shares']} publications={aggregates['publications']}"
        )
        lines.append(
            f"interventions: group1={aggregates['interventions_g1']}"
            f" group2={aggregates['interventions_g2']}"
            f" total={aggregates['interventions']}"
        )
    if edit_outcomes:
        lines.append("")
        lines.append("Edit outcomes")
        counts: dict[str, int] = {kind.value: 0 for kind in ChangeKind}
        for outcome in edit_outcomes:
            counts[outcome.change_kind.value] += 1
        for kind, count in counts.items():
            lines.append(f"{kind:<16} {count}")
    if reliability:
        lines.append("")
        lines.append("Survey scale reliability (Cronbach's alpha, threshold 0.70)")
        lines.append(f"{'scale':<6} {'alpha':>7} {'items':>6} {'respondents':>12} {'acceptable':>11}")
        for r in reliability:
            lines.append(
                f"{r.scale_id:<6} {_fmt(r.cronbach_alpha):>7} {r.item_count:>6}"
                f" {r.respondent_count:>12} {'yes' if r.acceptable else 'NO':>11}"
            )
    lines.append("")
    return "\n".join(lines)


def report_document(
    rows: Sequence[VariableComparison],
    aggregates: Mapping[str, int] | None = None,
    scores: Sequence[ConstructScore] = (),
    reliability: Sequence[ReliabilityResult] = (),
    edit_outcomes: Sequence[EditOutcome] = (),
) -> dict:
    """The same content as the text report, as a JSON-serializable dict."""
    doc: dict = {
        "descriptives": [
            {
                "variable": row.variable,
                "groups": [
                    {"group": label, "n": g.n, "mean": g.mean, "sd": g.sd, "se": g.se}
                    for label, g in (("G1", row.group1), ("G2", row.group2))
                ],
            }
            for row in rows
        ],
        "comparisons": [
            {
                "variable": row.variable,
                "t": row.comparison.t,
                "df": row.comparison.df,
                "p_two_tailed": row.comparison.p_two_tailed,
                "significant": row.comparison.significant,
                "mean_diff": row.comparison.mean_diff,
                "se_dm": row.comparison.se_dm,
                "ci95": list(row.comparison.ci95),
                "cohens_d": row.comparison.cohens_d,
                "levene": None
                if row.levene is None
                else {"w": row.levene.w, "p": row.levene.p},
            }
            for row in rows
            if row.comparison is not None
        ],
    }
    if aggregates is not None:
        doc["aggregates"] = dict(aggregates)
    if edit_outcomes:
        doc["edit_outcomes"] = [
            {
                "edit_event_id": o.edit_event_id,
                "followup_event_id": o.followup_event_id,
                "change_kind": o.change_kind.value,
            }
            for o in edit_outcomes
        ]
    if scores:
        doc["construct_scores"] = [
            {"participant_id": s.participant_id, "scale_id": s.scale_id, "score": s.score}
            for s in scores
        ]
    if reliability:
        doc["reliability"] = [
            {
                "scale_id": r.scale_id,
                "cronbach_alpha": r.cronbach_alpha,
                "item_count": r.item_count,
                "respondent_count": r.respondent_count,
                "acceptable": r.acceptable,
            }
            for r in reliability
        ]
    return doc


def render_document_json(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _comparison_rows_from_values(
    values_by_variable: Mapping[str, tuple[list[float], list[float]]],
) -> list[VariableComparison]:
    rows = []
    for variable, (g1_values, g2_values) in values_by_variable.items():
        g1 = summarize(g1_values)
        g2 = summarize(g2_values)
        try:
            comparison = pooled_t_test(g1, g2)
        except DegenerateInputError:
            comparison = None
        rows.append(
            VariableComparison(
                variable=variable,
                group1=g1,
                group2=g2,
                comparison=comparison,
                levene=levene_test([g1_values, g2_values]),
            )
        )
    return rows


def build_report_from_records(
    records: Sequence[ExportRecord],
    config: MetricsConfig = MetricsConfig(),
    survey_responses: Sequence[SurveyItemResponse] = (),
) -> tuple[str, dict]:
    """Full pipeline over an exported event log: per-user metrics, group
    summaries, Levene, pooled t-tests, edit-change detection, and optional
    survey scoring."""
    by_user: dict[int, list[ExportRecord]] = {}
    for record in records:
        by_user.setdefault(record.event.user_id, []).append(record)

    per_user: list[UserMetrics] = []
    edit_outcomes: list[EditOutcome] = []
    for user_id in sorted(by_user):
        user_records = by_user[user_id]
        variants = {r.app_variant for r in user_records}
        if len(variants) != 1:
            raise ValidationFailure(
                f"user {user_id} appears with multiple app variants"
            )
        events = [r.event for r in user_records]
        per_user.append(compute_user_metrics(events, variants.pop(), config))
        edit_outcomes.extend(
            detect_edit_changes(events, config.pairing_window_minutes)
        )

    aggregates = aggregate_counts(per_user)
    values_by_variable: dict[str, tuple[list[float], list[float]]] = {}
    for variable in BEHAVIOR_VARIABLES:
        field = _METRIC_FIELDS[variable]
        g1 = [float(getattr(m, field)) for m in per_user if m.group == "G1"]
        g2 = [float(getattr(m, field)) for m in per_user if m.group == "G2"]
        if len(g1) >= 2 and len(g2) >= 2:
            values_by_variable[variable] = (g1, g2)
    rows = _comparison_rows_from_values(values_by_variable)

    scores: list[ConstructScore] = []
    reliability: list[ReliabilityResult] = []
    if survey_responses:
        scores, reliability = score_survey(survey_responses)

    text = render_report(rows, aggregates, reliability, edit_outcomes)
    doc = report_document(rows, aggregates, scores, reliability, edit_outcomes)
    doc["per_user"] = [
        {
            "user_id": m.user_id,
            "group": m.group,
            "edits": m.edits,
            "posts": m.posts,
            "shares": m.shares,
            "publications": m.publications,
            "interventions_received": m.interventions_received,
            "exposure_ratio": m.exposure_ratio,
        }
        for m in per_user
    ]
    return text, doc


SUMMARY_COLUMNS = ("variable", "group", "n", "mean", "sd")


def read_summaries_file(path) -> list[tuple[str, GroupSummary, GroupSummary]]:
    """Read published summary rows (variable, group, n, mean, sd) from
    delimited text; each variable needs exactly groups 1 and 2."""
    by_variable: dict[str, dict[str, GroupSummary]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(SUMMARY_COLUMNS) - set(reader.fieldnames):
            raise ValidationFailure(
                f"{path}: summary file needs columns {list(SUMMARY_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                summary = GroupSummary(
                    n=int(row["n"]), mean=float(row["mean"]), sd=float(row["sd"])
                )
                group = row["group"].strip()
            except (TypeError, ValueError) as exc:
                raise ValidationFailure(f"{path}, line {line_no}: {exc}") from exc
            if group not in ("1", "2"):
                raise ValidationFailure(
                    f"{path}, line {line_no}, field group: must be 1 or 2, got {group!r}"
                )
            variable = row["variable"]
            if variable not in by_variable:
                order.append(variable)
                by_variable[variable] = {}
            if group in by_variable[variable]:
                raise ValidationFailure(
                    f"{path}, line {line_no}: duplicate group {group} for {variable}"
                )
            by_variable[variable][group] = summary
    rows = []
    for variable in order:
        groups = by_variable[variable]
        if set(groups) != {"1", "2"}:
            raise ValidationFailure(f"{path}: variable {variable} is missing a group row")
        rows.append((variable, groups["1"], groups["2"]))
    return rows


def build_report_from_summaries(
    summary_rows: Sequence[tuple[str, GroupSummary, GroupSummary]],
) -> tuple[str, dict]:
    """Comparison-only pipeline over published (N, mean, SD) rows; exists so
    group tables can be reproduced without the raw per-user data."""
    rows = [
        VariableComparison(
            variable=variable,
            group1=g1,
            group2=g2,
            comparison=pooled_t_test(g1, g2),
            levene=None,
        )
        for variable, g1, g2 in summary_rows
    ]
    text = render_report(rows)
    doc = report_document(rows)
    return text, doc
