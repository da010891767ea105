"""Per-user self-disclosure metrics and edit-change detection."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta
from enum import Enum
from typing import Sequence

from ..domain import ActivityEvent, AppVariant, PopupAction
from ..errors import ValidationFailure

DEFAULT_EXPERIMENT_DAYS = 7
DEFAULT_MAX_PER_DAY = 5
DEFAULT_PAIRING_WINDOW_MINUTES = 30


@dataclass(frozen=True)
class MetricsConfig:
    """Knobs for derived metrics: the exposure denominator and the
    edit-pairing window."""

    experiment_days: int = DEFAULT_EXPERIMENT_DAYS
    max_per_day: int = DEFAULT_MAX_PER_DAY
    pairing_window_minutes: int = DEFAULT_PAIRING_WINDOW_MINUTES


@dataclass(frozen=True)
class UserMetrics:
    """Behavioral counters for one participant.

    publications = posts + shares; interventions_received = edits + posts;
    exposure_ratio divides interventions received by the theoretical
    ceiling (days x daily budget).
    """

    user_id: int
    group: str
    edits: int
    posts: int
    shares: int
    publications: int
    interventions_received: int
    exposure_ratio: float


class ChangeKind(str, Enum):
    CAPTION_CHANGED = "CAPTION_CHANGED"
    IMAGE_CHANGED = "IMAGE_CHANGED"
    BOTH_CHANGED = "BOTH_CHANGED"
    NO_CHANGE = "NO_CHANGE"
    ABANDONED = "ABANDONED"


@dataclass(frozen=True)
class EditOutcome:
    edit_event_id: int
    followup_event_id: int | None
    change_kind: ChangeKind


def group_of(variant: AppVariant) -> str:
    return "G1" if variant == AppVariant.V1 else "G2"


def compute_user_metrics(
    events: Sequence[ActivityEvent],
    variant: AppVariant,
    config: MetricsConfig = MetricsConfig(),
) -> UserMetrics:
    """Count actions 0/1/2 for one user's deduplicated event list."""
    user_ids = {e.user_id for e in events}
    if len(user_ids) > 1:
        raise ValidationFailure(f"events span multiple users: {sorted(user_ids)}")
    user_id = next(iter(user_ids)) if user_ids else 0
    edits = sum(1 for e in events if e.popup_action == PopupAction.EDIT)
    posts = sum(1 for e in events if e.popup_action == PopupAction.POST)
    shares = sum(
        1 for e in events if e.popup_action == PopupAction.SHARE_NO_INTERVENTION
    )
    interventions = edits + posts
    ceiling = config.experiment_days * config.max_per_day
    return UserMetrics(
        user_id=user_id,
        group=group_of(variant),
        edits=edits,
        posts=posts,
        shares=shares,
        publications=posts + shares,
        interventions_received=interventions,
        exposure_ratio=interventions / ceiling if ceiling else 0.0,
    )


def detect_edit_changes(
    events: Sequence[ActivityEvent],
    pairing_window_minutes: int = DEFAULT_PAIRING_WINDOW_MINUTES,
) -> list[EditOutcome]:
    """Pair each EDIT event with its next event and classify the change.

    The follow-up is the next event of the same user (any action code)
    whose timestamp falls within the pairing window. Caption changes show
    up as a different post_hash, image swaps as a different image_hash;
    an edit with no follow-up inside the window was abandoned.
    """
    ordered = sorted(events, key=lambda e: (e.timestamp, e.event_id or 0))
    window = timedelta(minutes=pairing_window_minutes)
    outcomes: list[EditOutcome] = []
    for i, event in enumerate(ordered):
        if event.popup_action != PopupAction.EDIT:
            continue
        followup = ordered[i + 1] if i + 1 < len(ordered) else None
        if followup is None or followup.timestamp - event.timestamp > window:
            outcomes.append(
                EditOutcome(event.event_id or 0, None, ChangeKind.ABANDONED)
            )
            continue
        caption_changed = followup.post_hash != event.post_hash
        image_changed = followup.image_hash != event.image_hash
        if caption_changed and image_changed:
            kind = ChangeKind.BOTH_CHANGED
        elif caption_changed:
            kind = ChangeKind.CAPTION_CHANGED
        elif image_changed:
            kind = ChangeKind.IMAGE_CHANGED
        else:
            kind = ChangeKind.NO_CHANGE
        outcomes.append(
            EditOutcome(event.event_id or 0, followup.event_id or 0, kind)
        )
    return outcomes


def aggregate_counts(per_user: Sequence[UserMetrics]) -> dict[str, int]:
    """Study-wide totals plus per-group intervention counts."""
    totals = {
        "edits": sum(m.edits for m in per_user),
        "posts": sum(m.posts for m in per_user),
        "shares": sum(m.shares for m in per_user),
        "publications": sum(m.publications for m in per_user),
        "interventions_g1": sum(
            m.interventions_received for m in per_user if m.group == "G1"
        ),
        "interventions_g2": sum(
            m.interventions_received for m in per_user if m.group == "G2"
        ),
    }
    totals["interventions"] = totals["interventions_g1"] + totals["interventions_g2"]
    return totals
