"""Shared vocabulary: entities mirroring the events database, the content
pseudonymization procedure, and the survey constructs.

Everything here is an immutable value or a pure function, safe to use from
any number of threads.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum, IntEnum

from .errors import ConfigurationFailure, ValidationFailure

HEX64_RE = re.compile(r"^[0-9a-f]{64}$")

LIKERT_MIN = 1
LIKERT_MAX = 7

CORPUS_SIZE = 26
CATEGORY_COUNT = 6

#: Canonical category ids and names; a corpus must cover exactly these.
CATEGORY_NAMES: dict[int, str] = {
    1: "drugs-and-alcohol-use",
    2: "sex",
    3: "religion-and-politics",
    4: "strong-sentiment",
    5: "location",
    6: "personal-identifiers",
}


class AppVariant(str, Enum):
    """Which pop-up the user sees: legend only (V1) or legend plus a risk
    fact of the day (V2)."""

    V1 = "V1"
    V2 = "V2"


class Language(str, Enum):
    EN = "EN"
    DE = "DE"


class PopupAction(IntEnum):
    """The three recorded behavioral outcomes.

    Codes 0 and 1 occur only as resolutions of a displayed intervention;
    code 2 is a share that no intervention preceded.
    """

    EDIT = 0
    POST = 1
    SHARE_NO_INTERVENTION = 2


#: Human-readable descriptions for the three fixed popup_actions rows.
POPUP_ACTION_DESCRIPTIONS: dict[int, str] = {
    0: "clicked edit after receiving an intervention",
    1: "clicked post after receiving an intervention",
    2: "shared without receiving an intervention",
}


@dataclass(frozen=True)
class UserAccount:
    user_id: int
    username: str
    password_digest: str
    app_variant: AppVariant
    language: Language
    registration_code: str
    created_at: datetime


@dataclass(frozen=True)
class MessageCategory:
    category_id: int
    name: str


@dataclass(frozen=True)
class InterventionMessage:
    """One risk fact from the 26-message corpus, text already resolved to
    the reader's language."""

    message_id: int
    category_id: int
    text: str
    risk_value: float


@dataclass(frozen=True)
class ActivityEvent:
    """One pseudonymized behavioral snapshot; the unit of all analysis.

    ``event_id`` is None until the store assigns one. ``client_event_id``
    is the client-generated idempotency key (RFC 4122 text).
    """

    client_event_id: str
    user_id: int
    popup_action: PopupAction
    message_id: int | None
    post_length: int
    post_hash: str
    image_hash: str
    timestamp: datetime
    event_id: int | None = None

    def validated(self) -> "ActivityEvent":
        """Check the field-level invariants; returns self for chaining."""
        if self.user_id < 1:
            raise ValidationFailure("user_id must be a positive integer")
        if self.post_length < 0:
            raise ValidationFailure("post_length must be >= 0")
        for label, value in (("post_hash", self.post_hash), ("image_hash", self.image_hash)):
            if not HEX64_RE.match(value):
                raise ValidationFailure(f"{label} must be 64 lowercase hex characters")
        if self.popup_action == PopupAction.SHARE_NO_INTERVENTION and self.message_id is not None:
            raise ValidationFailure("message_id must be absent when popup_action is 2")
        if self.message_id is not None and not 1 <= self.message_id <= CORPUS_SIZE:
            raise ValidationFailure(f"message_id must be in 1..{CORPUS_SIZE}")
        if self.timestamp.tzinfo is None:
            raise ValidationFailure("timestamp must be timezone-aware UTC")
        return self


@dataclass(frozen=True)
class ConstructScale:
    """A multi-item Likert construct with its reverse-coded subset."""

    scale_id: str
    item_ids: tuple[str, ...]
    reversed_items: frozenset[str]
    likert_min: int = LIKERT_MIN
    likert_max: int = LIKERT_MAX


#: The four survey constructs measured at the end of the experiment.
#: BEN aggregates convenience, relationship building, self-representation,
#: and enjoyment items into one score.
SCALES: tuple[ConstructScale, ...] = (
    ConstructScale("RSK", ("RSK1", "RSK2", "RSK3"), frozenset({"RSK1", "RSK2"})),
    ConstructScale("CTRL", ("PC1", "PC2", "PC3"), frozenset()),
    ConstructScale(
        "BEN",
        ("CON1", "CON2", "CON3", "RB1", "RB2", "RB3", "SR1", "SR2", "EN1", "EN2", "EN3"),
        frozenset(),
    ),
    ConstructScale(
        "EIPC",
        ("EIPC1", "EIPC2", "EIPC3", "EIPC4", "EIPC5", "EIPC6"),
        frozenset(),
    ),
)

SCALES_BY_ID: dict[str, ConstructScale] = {s.scale_id: s for s in SCALES}


def digest_content(user_id: int, content: str) -> str:
    """Pseudonymize content as a fixed-size hex digest.

    SHA-256 over the UTF-8 bytes of ``"<user_id>:<content>"``. The user-id
    prefix salts the digest per user, so equal captions from different
    users produce unrelated pseudonyms while each user's repeats remain
    linkable. Pure and total; the empty string is a valid input.
    """
    if user_id < 1:
        raise ValidationFailure("user_id must be a positive integer")
    payload = f"{user_id}:{content}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def make_registration_code(user_id: int, server_secret: str) -> str:
    """Derive the 8-character engagement-proof code handed to participants.

    First 8 hex characters of SHA-256 over ``"<user_id>:<server_secret>"``,
    uppercased. Deterministic, so the code can be re-derived for support
    requests without storing anything beyond the account row.
    """
    if not server_secret:
        raise ConfigurationFailure("server_secret must be nonempty")
    payload = f"{user_id}:{server_secret}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:8].upper()


def reverse_item(value: int, item_id: str = "") -> int:
    """Reverse-code one 7-point Likert answer (1 <-> 7, midpoint fixed)."""
    if not LIKERT_MIN <= value <= LIKERT_MAX:
        label = f" for item {item_id}" if item_id else ""
        raise ValidationFailure(
            f"Likert value{label} must be in {LIKERT_MIN}..{LIKERT_MAX}, got {value!r}"
        )
    return LIKERT_MIN + LIKERT_MAX - value


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, requiring an explicit UTC offset.

    Accepts the `Z` suffix (fromisoformat only learned it in 3.11).
    """
    normalized = text[:-1] + "+00:00" if text.endswith("Z") else text
    try:
        parsed = datetime.fromisoformat(normalized)
    except ValueError as exc:
        raise ValidationFailure(f"bad timestamp {text!r}: {exc}") from exc
    if parsed.tzinfo is None:
        raise ValidationFailure(f"timestamp {text!r} lacks a UTC offset")
    return parsed
