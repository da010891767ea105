"""Intervention policy: decide whether a share attempt gets a pop-up,
pick the message, and manage token lifecycles.

The budget (at most ``max_per_day`` pop-ups per calendar day) and the
minimum gap between pop-ups are charged at token issuance, i.e. when the
pop-up is displayed, never at resolution. Abandoning a pop-up therefore
cannot recover budget.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence
from zoneinfo import ZoneInfo

from .domain import AppVariant, InterventionMessage, UserAccount
from .errors import ConfigurationFailure, ConflictFailure, ExpiredTokenFailure, ValidationFailure

LEGEND = "Ready to share?"

#: Keys accepted in a policy configuration file.
POLICY_FILE_KEYS = {
    "max_per_day",
    "min_gap_minutes",
    "no_repeat_same_day",
    "token_ttl_minutes",
    "day_boundary_timezone",
    "selection_strategy",
    "rng_seed",
}


@dataclass(frozen=True)
class PolicyConfig:
    max_per_day: int = 5
    min_gap_minutes: int = 60
    no_repeat_same_day: bool = True
    token_ttl_minutes: int = 15
    day_boundary_timezone: str = "UTC"
    selection_strategy: str = "UNIFORM_RANDOM"
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if self.max_per_day < 1:
            raise ConfigurationFailure("max_per_day must be >= 1")
        if self.min_gap_minutes < 0:
            raise ConfigurationFailure("min_gap_minutes must be >= 0")
        if self.token_ttl_minutes < 1:
            raise ConfigurationFailure("token_ttl_minutes must be >= 1")
        if self.selection_strategy != "UNIFORM_RANDOM":
            raise ConfigurationFailure(
                f"unknown selection_strategy {self.selection_strategy!r}"
            )
        self.tzinfo()  # fail fast on unknown timezone names

    def tzinfo(self) -> timezone | ZoneInfo:
        if self.day_boundary_timezone == "UTC":
            return timezone.utc
        try:
            return ZoneInfo(self.day_boundary_timezone)
        except Exception as exc:
            raise ConfigurationFailure(
                f"unknown timezone {self.day_boundary_timezone!r}"
            ) from exc

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PolicyConfig":
        unknown = set(data) - POLICY_FILE_KEYS
        if unknown:
            raise ConfigurationFailure(f"unknown policy keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PolicyConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationFailure(f"bad policy file {path}: {exc}") from exc
        return cls.from_mapping(data)


class TokenState(str, Enum):
    PENDING = "PENDING"
    RESOLVED_EDIT = "RESOLVED_EDIT"
    RESOLVED_POST = "RESOLVED_POST"
    EXPIRED = "EXPIRED"


class ResolveAction(str, Enum):
    EDIT = "edit"
    POST = "post"


@dataclass(frozen=True)
class InterventionToken:
    """Server-issued handle binding a displayed pop-up to its resolution."""

    token: str
    user_id: int
    message_id: int | None
    issued_at: datetime
    expires_at: datetime
    state: TokenState = TokenState.PENDING


@dataclass(frozen=True)
class IssuanceRecord:
    """What the policy needs to remember about one past token."""

    issued_at: datetime
    message_id: int | None


class DecisionKind(str, Enum):
    INTERVENE = "intervene"
    PASS = "pass"


@dataclass(frozen=True)
class DecisionOutcome:
    kind: DecisionKind
    token: InterventionToken | None = None
    message: InterventionMessage | None = None


def local_day(ts: datetime, config: PolicyConfig) -> date:
    """Calendar day of a timestamp in the configured day-boundary zone."""
    return ts.astimezone(config.tzinfo()).date()


def summarize_history(
    history: Sequence[IssuanceRecord], now: datetime, config: PolicyConfig
) -> tuple[int, datetime | None, set[int]]:
    """(count issued today, most recent issuance ever, message ids shown
    today) for one user's issuance log."""
    today = local_day(now, config)
    count = 0
    shown_today: set[int] = set()
    last: datetime | None = None
    for record in history:
        if last is None or record.issued_at > last:
            last = record.issued_at
        if local_day(record.issued_at, config) == today:
            count += 1
            if record.message_id is not None:
                shown_today.add(record.message_id)
    return count, last, shown_today


def select_message(
    user: UserAccount,
    corpus: Sequence[InterventionMessage],
    shown_today: set[int],
    rng: random.Random,
) -> InterventionMessage | None:
    """Uniform random draw from the corpus minus what the user already saw
    today. V1 users get no message: their pop-up shows only the legend."""
    if user.app_variant == AppVariant.V1:
        return None
    if not corpus:
        raise ConfigurationFailure("message corpus is empty but a V2 user is active")
    eligible = [m for m in corpus if m.message_id not in shown_today]
    if not eligible:
        # Unreachable with the default budget (5/day) against a 26-message
        # corpus; guards misconfigured setups.
        raise ConfigurationFailure(
            "no eligible messages left today; corpus smaller than daily budget"
        )
    return rng.choice(eligible)


def decide(
    user: UserAccount,
    now: datetime,
    config: PolicyConfig,
    history: Sequence[IssuanceRecord],
    corpus: Sequence[InterventionMessage],
    rng: random.Random,
) -> DecisionOutcome:
    """Intervene iff both the daily budget and the minimum gap allow it.

    Pure given its inputs: replaying the same (user, now, config, history,
    rng state) yields the same outcome. The caller must persist the
    returned token atomically with this decision.
    """
    count_today, last_issued, shown_today = summarize_history(history, now, config)
    if count_today >= config.max_per_day:
        return DecisionOutcome(kind=DecisionKind.PASS)
    if last_issued is not None:
        gap = now - last_issued
        if gap < timedelta(minutes=config.min_gap_minutes):
            return DecisionOutcome(kind=DecisionKind.PASS)
    message = select_message(
        user, corpus, shown_today if config.no_repeat_same_day else set(), rng
    )
    # The token id is a capability handle; drawing it from the decision rng
    # keeps responses replay-deterministic under a fixed seed. Ownership is
    # enforced separately, so the handle is not the only guard.
    token = InterventionToken(
        token=str(uuid.UUID(int=rng.getrandbits(128), version=4)),
        user_id=user.user_id,
        message_id=message.message_id if message else None,
        issued_at=now,
        expires_at=now + timedelta(minutes=config.token_ttl_minutes),
        state=TokenState.PENDING,
    )
    return DecisionOutcome(kind=DecisionKind.INTERVENE, token=token, message=message)


def transition(token: InterventionToken, action: ResolveAction, now: datetime) -> TokenState:
    """Validate and name the single allowed PENDING -> RESOLVED transition.

    The caller performs the actual state write (compare-and-set in the
    store); this function only encodes the rules.
    """
    if token.state == TokenState.EXPIRED:
        raise ExpiredTokenFailure(f"token {token.token} expired at {token.expires_at.isoformat()}")
    if token.state != TokenState.PENDING:
        raise ConflictFailure(f"token {token.token} already resolved as {token.state.value}")
    if now >= token.expires_at:
        raise ExpiredTokenFailure(f"token {token.token} passed its TTL")
    if action == ResolveAction.EDIT:
        return TokenState.RESOLVED_EDIT
    if action == ResolveAction.POST:
        return TokenState.RESOLVED_POST
    raise ValidationFailure(f"unknown resolve action {action!r}")
