"""Offline re-verification of the policy invariants over a full history.

Two entry points: auditing a live store (exact, uses token issuance times)
and auditing an export file (events only; action-0/1 timestamps stand in
for pop-up display times, which is exact whenever resolutions are recorded
at display time).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .domain import ActivityEvent, AppVariant, PopupAction
from .engine import PolicyConfig, local_day
from .store import EventStore, ExportRecord, read_export


@dataclass(frozen=True)
class Violation:
    kind: str  # budget | gap | repeat | message_rule
    user_id: int
    detail: str
    evidence: tuple[str, ...]

    def __str__(self) -> str:
        return f"[{self.kind}] user {self.user_id}: {self.detail} (evidence: {', '.join(self.evidence)})"


@dataclass(frozen=True)
class _Display:
    """One intervention display: issuance for store audits, the resolved
    event for export audits."""

    at: datetime
    message_id: int | None
    ref: str


def audit_display_log(
    user_id: int,
    variant: AppVariant | None,
    displays: list[tuple[datetime, int | None, str]],
    policy: PolicyConfig,
) -> list[Violation]:
    """Audit one user's raw display log of (shown_at, message_id, ref)
    triples against budget, gap, and no-repeat."""
    return _check_displays(
        user_id, variant, [_Display(at=a, message_id=m, ref=r) for a, m, r in displays], policy
    )


def _check_displays(
    user_id: int,
    variant: AppVariant | None,
    displays: list[_Display],
    policy: PolicyConfig,
) -> list[Violation]:
    violations: list[Violation] = []
    ordered = sorted(displays, key=lambda d: d.at)
    # budget per calendar day
    by_day: dict = {}
    for d in ordered:
        by_day.setdefault(local_day(d.at, policy), []).append(d)
    for day, day_displays in sorted(by_day.items()):
        if len(day_displays) > policy.max_per_day:
            violations.append(
                Violation(
                    kind="budget",
                    user_id=user_id,
                    detail=f"{len(day_displays)} interventions on {day},"
                    f" budget is {policy.max_per_day}",
                    evidence=tuple(d.ref for d in day_displays),
                )
            )
        if variant == AppVariant.V2:
            seen: dict[int, _Display] = {}
            for d in day_displays:
                if d.message_id is None:
                    continue
                if d.message_id in seen:
                    violations.append(
                        Violation(
                            kind="repeat",
                            user_id=user_id,
                            detail=f"message {d.message_id} shown twice on {day}",
                            evidence=(seen[d.message_id].ref, d.ref),
                        )
                    )
                else:
                    seen[d.message_id] = d
    # minimum gap applies across day boundaries
    min_gap = timedelta(minutes=policy.min_gap_minutes)
    for earlier, later in zip(ordered, ordered[1:]):
        if later.at - earlier.at < min_gap:
            violations.append(
                Violation(
                    kind="gap",
                    user_id=user_id,
                    detail=f"interventions {((later.at - earlier.at).total_seconds() / 60):.1f} min"
                    f" apart, minimum is {policy.min_gap_minutes}",
                    evidence=(earlier.ref, later.ref),
                )
            )
    return violations


def _check_event_shape(
    event: ActivityEvent, variant: AppVariant | None
) -> list[Violation]:
    violations = []
    intervened = event.popup_action in (PopupAction.EDIT, PopupAction.POST)
    ref = f"event {event.event_id}"
    if not intervened and event.message_id is not None:
        violations.append(
            Violation("message_rule", event.user_id,
                      "action 2 must not carry a message_id", (ref,))
        )
    if intervened and variant == AppVariant.V2 and event.message_id is None:
        violations.append(
            Violation("message_rule", event.user_id,
                      "V2 intervention event lacks its message_id", (ref,))
        )
    if intervened and variant == AppVariant.V1 and event.message_id is not None:
        violations.append(
            Violation("message_rule", event.user_id,
                      "V1 events must not carry a message_id", (ref,))
        )
    return violations


def audit_store(store: EventStore, policy: PolicyConfig) -> list[Violation]:
    """Exact audit from token issuance times plus event-shape checks."""
    violations: list[Violation] = []
    variants = {u.user_id: u.app_variant for u in store.all_users()}
    displays_by_user: dict[int, list[_Display]] = {}
    for token in store.all_tokens():
        displays_by_user.setdefault(token.user_id, []).append(
            _Display(at=token.issued_at, message_id=token.message_id,
                     ref=f"token {token.token}")
        )
    for user_id in sorted(displays_by_user):
        violations.extend(
            _check_displays(user_id, variants.get(user_id), displays_by_user[user_id], policy)
        )
    for record in store.export_records():
        violations.extend(_check_event_shape(record.event, record.app_variant))
    return violations


def audit_export_records(
    records: list[ExportRecord], policy: PolicyConfig
) -> list[Violation]:
    """Audit an exported event log. Interventions are the action-0/1
    events; their timestamps approximate display times."""
    violations: list[Violation] = []
    displays_by_user: dict[int, list[_Display]] = {}
    variant_by_user: dict[int, AppVariant] = {}
    for record in records:
        event = record.event
        variant_by_user[event.user_id] = record.app_variant
        violations.extend(_check_event_shape(event, record.app_variant))
        if event.popup_action in (PopupAction.EDIT, PopupAction.POST):
            displays_by_user.setdefault(event.user_id, []).append(
                _Display(at=event.timestamp, message_id=event.message_id,
                         ref=f"event {event.event_id}")
            )
    for user_id in sorted(displays_by_user):
        violations.extend(
            _check_displays(
                user_id, variant_by_user.get(user_id), displays_by_user[user_id], policy
            )
        )
    return violations


def audit_export(path: str | Path, policy: PolicyConfig) -> list[Violation]:
    return audit_export_records(read_export(path), policy)
