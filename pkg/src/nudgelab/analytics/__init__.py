"""Offline analysis: behavioral metrics, inferential statistics, survey
scoring, and report rendering."""

from .distributions import (
    f_sf,
    regularized_incomplete_beta,
    student_t_cdf,
    student_t_ppf,
    student_t_sf,
    student_t_two_tailed_p,
)
from .inference import (
    GroupComparison,
    GroupSummary,
    LeveneResult,
    levene_test,
    pooled_t_test,
    summarize,
)
from .metrics import (
    ChangeKind,
    EditOutcome,
    MetricsConfig,
    UserMetrics,
    aggregate_counts,
    compute_user_metrics,
    detect_edit_changes,
    group_of,
)
from .report import (
    VariableComparison,
    build_report_from_records,
    build_report_from_summaries,
    read_summaries_file,
    render_document_json,
    render_report,
    report_document,
)
from .survey import (
    RELIABILITY_THRESHOLD,
    ConstructScore,
    ReliabilityResult,
    SurveyItemResponse,
    cronbach_alpha,
    read_survey_file,
    score_survey,
)

__all__ = [
    "ChangeKind",
    "ConstructScore",
    "EditOutcome",
    "GroupComparison",
    "GroupSummary",
    "LeveneResult",
    "MetricsConfig",
    "RELIABILITY_THRESHOLD",
    "ReliabilityResult",
    "SurveyItemResponse",
    "UserMetrics",
    "VariableComparison",
    "aggregate_counts",
    "build_report_from_records",
    "build_report_from_summaries",
    "compute_user_metrics",
    "cronbach_alpha",
    "detect_edit_changes",
    "f_sf",
    "group_of",
    "levene_test",
    "pooled_t_test",
    "read_summaries_file",
    "read_survey_file",
    "regularized_incomplete_beta",
    "render_document_json",
    "render_report",
    "report_document",
    "score_survey",
    "student_t_cdf",
    "student_t_ppf",
    "student_t_sf",
    "student_t_two_tailed_p",
    "summarize",
]
