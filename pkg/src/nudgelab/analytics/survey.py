"""Survey construct scoring: reverse coding, per-participant scale means,
and Cronbach's alpha reliability."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..domain import SCALES, ConstructScale, reverse_item
from ..errors import ValidationFailure

#: Conventional lower bound for acceptable internal consistency.
RELIABILITY_THRESHOLD = 0.70


@dataclass(frozen=True)
class SurveyItemResponse:
    participant_id: str
    item_id: str
    value: int


@dataclass(frozen=True)
class ConstructScore:
    participant_id: str
    scale_id: str
    score: float


@dataclass(frozen=True)
class ReliabilityResult:
    scale_id: str
    cronbach_alpha: float
    item_count: int
    respondent_count: int

    @property
    def acceptable(self) -> bool:
        return self.cronbach_alpha >= RELIABILITY_THRESHOLD


def _sample_variance(values: Sequence[float]) -> float:
    n = len(values)
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / (n - 1)


def cronbach_alpha(item_matrix: Sequence[Sequence[float]]) -> float:
    """Cronbach's alpha for a respondents x items matrix.

    alpha = k/(k-1) * (1 - sum of item variances / variance of item sums),
    with sample (n-1) variances throughout.
    """
    n = len(item_matrix)
    if n < 2:
        raise ValidationFailure("Cronbach's alpha needs at least 2 respondents")
    k = len(item_matrix[0])
    if k < 2:
        raise ValidationFailure("Cronbach's alpha needs at least 2 items")
    if any(len(row) != k for row in item_matrix):
        raise ValidationFailure("item matrix rows must have equal length")
    if all(len(set(row)) == 1 for row in item_matrix):
        # Identical item columns: the variance ratio is analytically 1/k,
        # so alpha is exactly 1 (float rounding must not blur this).
        return 1.0
    item_vars = [
        _sample_variance([row[j] for row in item_matrix]) for j in range(k)
    ]
    total_var = _sample_variance([math.fsum(row) for row in item_matrix])
    if total_var == 0.0:
        # No spread in the sums: every respondent answered identically.
        return 1.0
    return (k / (k - 1)) * (1.0 - math.fsum(item_vars) / total_var)


def score_survey(
    responses: Iterable[SurveyItemResponse],
    scales: Sequence[ConstructScale] = SCALES,
) -> tuple[list[ConstructScore], list[ReliabilityResult]]:
    """Score every scale for every participant who answered all its items.

    Reverse-coded items are flipped before averaging. Participants missing
    any item of a scale are excluded from that scale only (listwise per
    scale). Reliability is computed over the included respondents.
    """
    by_participant: dict[str, dict[str, int]] = {}
    for r in responses:
        if not 1 <= r.value <= 7:
            raise ValidationFailure(
                f"participant {r.participant_id}, item {r.item_id}: "
                f"value {r.value} outside 1..7"
            )
        by_participant.setdefault(r.participant_id, {})[r.item_id] = r.value

    scores: list[ConstructScore] = []
    reliability: list[ReliabilityResult] = []
    for scale in scales:
        matrix: list[list[float]] = []
        for pid in sorted(by_participant):
            answers = by_participant[pid]
            if not all(item in answers for item in scale.item_ids):
                continue
            coded = [
                float(reverse_item(answers[item], item))
                if item in scale.reversed_items
                else float(answers[item])
                for item in scale.item_ids
            ]
            matrix.append(coded)
            scores.append(
                ConstructScore(
                    participant_id=pid,
                    scale_id=scale.scale_id,
                    score=math.fsum(coded) / len(coded),
                )
            )
        if len(matrix) >= 2:
            alpha = cronbach_alpha(matrix)
            reliability.append(
                ReliabilityResult(
                    scale_id=scale.scale_id,
                    cronbach_alpha=alpha,
                    item_count=len(scale.item_ids),
                    respondent_count=len(matrix),
                )
            )
    return scores, reliability


def read_survey_file(path: str | Path) -> list[SurveyItemResponse]:
    """Read the delimited survey file: participant_id, item_id, value."""
    responses = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"participant_id", "item_id", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationFailure(
                f"survey file {path} must have columns participant_id, item_id, value"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                value = int(row["value"])
            except (TypeError, ValueError) as exc:
                raise ValidationFailure(
                    f"{path}, line {line_no}, field value: {row.get('value')!r} is not an integer"
                ) from exc
            responses.append(
                SurveyItemResponse(
                    participant_id=row["participant_id"],
                    item_id=row["item_id"],
                    value=value,
                )
            )
    return responses
