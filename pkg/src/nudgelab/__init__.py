"""nudgelab: a self-contained platform for field experiments on
preventative privacy nudges.

Backend service with a rate-limited intervention policy, pseudonymized
event telemetry, a deterministic cohort simulator, and an analytics
pipeline for two-group behavioral comparisons.
"""

__version__ = "0.1.0"

from .domain import (
    ActivityEvent,
    AppVariant,
    ConstructScale,
    InterventionMessage,
    Language,
    MessageCategory,
    PopupAction,
    UserAccount,
    digest_content,
    make_registration_code,
    reverse_item,
)
from .engine import DecisionKind, DecisionOutcome, InterventionToken, PolicyConfig, TokenState
from .service import NudgeService
from .store import EventStore

__all__ = [
    "ActivityEvent",
    "AppVariant",
    "ConstructScale",
    "DecisionKind",
    "DecisionOutcome",
    "EventStore",
    "InterventionMessage",
    "InterventionToken",
    "Language",
    "MessageCategory",
    "NudgeService",
    "PolicyConfig",
    "PopupAction",
    "TokenState",
    "UserAccount",
    "digest_content",
    "make_registration_code",
    "reverse_item",
    "__version__",
]
