"""Application core behind the HTTP boundary: session authentication and
the share-attempt / resolve protocol.

This is the single writer into the engine and the store. All policy checks
use the server clock; client timestamps are logged for diagnostics only.
Handlers are safe to call from concurrent threads: the budget/gap check and
token issuance form one atomic step per user.
"""

from __future__ import annotations

import hashlib
import logging
import random
import secrets
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable

from . import engine
from .domain import (
    HEX64_RE,
    ActivityEvent,
    AppVariant,
    Language,
    PopupAction,
    UserAccount,
    make_registration_code,
    parse_timestamp,
    utc_now,
)
from .engine import DecisionKind, PolicyConfig, ResolveAction, TokenState
from .errors import (
    AuthenticationFailure,
    AuthorizationFailure,
    ConfigurationFailure,
    ConflictFailure,
    NotFoundFailure,
    ValidationFailure,
)
from .store import EventStore

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"
MIN_PASSWORD_LENGTH = 8
SESSION_TOKEN_BYTES = 16  # 32 hex characters, 128 random bits

_PBKDF2_ITERATIONS = 50_000


def hash_password(password: str) -> str:
    """Salted PBKDF2-SHA256 digest; plaintext is never stored."""
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, _PBKDF2_ITERATIONS)
    return f"pbkdf2_sha256${_PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, iterations, salt_hex, digest_hex = stored.split("$")
        if scheme != "pbkdf2_sha256":
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), int(iterations)
        )
        return secrets.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


@dataclass(frozen=True)
class Session:
    session_token: str
    user_id: int
    issued_at: datetime
    expires_at: datetime


def _validated_hash(value: str, label: str) -> str:
    if not HEX64_RE.match(value or ""):
        raise ValidationFailure(f"{label} must be 64 lowercase hex characters")
    return value


def _validated_event_id(value: str) -> str:
    try:
        uuid.UUID(value)
    except (ValueError, AttributeError, TypeError) as exc:
        raise ValidationFailure("client_event_id must be an RFC 4122 identifier") from exc
    return value


class NudgeService:
    """Transport-agnostic handlers; the HTTP layer is a thin adapter."""

    def __init__(
        self,
        store: EventStore,
        policy: PolicyConfig,
        server_secret: str,
        clock: Callable[[], datetime] = utc_now,
        session_ttl_hours: int = 24,
    ) -> None:
        if not server_secret:
            raise ConfigurationFailure("server_secret must be nonempty")
        self.store = store
        self.policy = policy
        self._secret = server_secret
        self._clock = clock
        self._session_ttl = timedelta(hours=session_ttl_hours)
        self._sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        self._user_locks: dict[int, threading.Lock] = {}
        self._user_locks_guard = threading.Lock()
        self._user_rngs: dict[int, random.Random] = {}
        # Responses must replay deterministically under a fixed seed, so a
        # seeded policy also seeds session-token generation. Without a seed
        # tokens come from the OS CSPRNG.
        if policy.rng_seed is None:
            self._session_tokens = lambda: secrets.token_hex(SESSION_TOKEN_BYTES)
        else:
            session_rng = random.Random(f"{policy.rng_seed}:sessions")
            self._session_tokens = lambda: session_rng.getrandbits(
                SESSION_TOKEN_BYTES * 8
            ).to_bytes(SESSION_TOKEN_BYTES, "big").hex()

    # -- plumbing ---------------------------------------------------------

    def now(self) -> datetime:
        return self._clock()

    def _user_lock(self, user_id: int) -> threading.Lock:
        with self._user_locks_guard:
            lock = self._user_locks.get(user_id)
            if lock is None:
                lock = self._user_locks[user_id] = threading.Lock()
            return lock

    def _rng_for(self, user_id: int) -> random.Random:
        with self._user_locks_guard:
            rng = self._user_rngs.get(user_id)
            if rng is None:
                seed = self.policy.rng_seed
                rng = random.Random() if seed is None else random.Random(f"{seed}:{user_id}")
                self._user_rngs[user_id] = rng
            return rng

    def _authenticate(self, session_token: str) -> Session:
        with self._sessions_lock:
            session = self._sessions.get(session_token or "")
            if session is None:
                raise AuthenticationFailure("invalid or expired session")
            if self.now() >= session.expires_at:
                del self._sessions[session_token]
                raise AuthenticationFailure("invalid or expired session")
            return session

    def require_corpus(self) -> None:
        """Fail fast when V2 traffic is possible but no corpus is seeded."""
        if self.store.corpus_size() == 0:
            raise ConfigurationFailure(
                "message corpus is not seeded; run the corpus seeding command first"
            )

    # -- API operations ---------------------------------------------------

    def register(
        self, username: str, password: str, app_variant: str, language: str
    ) -> dict:
        if not username or not username.strip():
            raise ValidationFailure("username must be nonempty")
        if len(password or "") < MIN_PASSWORD_LENGTH:
            raise ValidationFailure(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        try:
            variant = AppVariant(app_variant)
            lang = Language(language)
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from exc
        user = self.store.add_user(
            username=username.strip(),
            password_digest=hash_password(password),
            app_variant=variant,
            language=lang,
            code_factory=lambda uid: make_registration_code(uid, self._secret),
        )
        return {
            "protocol_version": PROTOCOL_VERSION,
            "user_id": user.user_id,
            "registration_code": user.registration_code,
        }

    def login(self, username: str, password: str) -> dict:
        user = self.store.find_user(username or "")
        # Same failure for unknown user and wrong password: no existence leak.
        if user is None or not verify_password(password or "", user.password_digest):
            raise AuthenticationFailure("bad credentials")
        now = self.now()
        session = Session(
            session_token=self._session_tokens(),
            user_id=user.user_id,
            issued_at=now,
            expires_at=now + self._session_ttl,
        )
        with self._sessions_lock:
            self._sessions[session.session_token] = session
        return {
            "protocol_version": PROTOCOL_VERSION,
            "session_token": session.session_token,
            "expires_at": session.expires_at.isoformat(),
        }

    def logout(self, session_token: str) -> dict:
        self._authenticate(session_token)
        with self._sessions_lock:
            self._sessions.pop(session_token, None)
        return {"protocol_version": PROTOCOL_VERSION, "status": "logged_out"}

    def share_attempt(
        self,
        session_token: str,
        client_event_id: str,
        post_length: int,
        post_hash: str,
        image_hash: str,
        client_timestamp: str,
    ) -> dict:
        session = self._authenticate(session_token)
        user = self.store.get_user(session.user_id)
        _validated_event_id(client_event_id)
        if post_length < 0:
            raise ValidationFailure("post_length must be >= 0")
        _validated_hash(post_hash, "post_hash")
        _validated_hash(image_hash, "image_hash")
        client_ts = parse_timestamp(client_timestamp)
        now = self.now()
        logger.debug(
            "share_attempt user=%s client_ts=%s server_ts=%s",
            user.user_id, client_ts.isoformat(), now.isoformat(),
        )
        with self._user_lock(user.user_id):
            self.store.expire_tokens(now)
            replay = self._replay_share_attempt(user, client_event_id)
            if replay is not None:
                return replay
            history = self.store.issuance_history(user.user_id)
            corpus = self.store.corpus_for(user.language)
            if user.app_variant == AppVariant.V2 and not corpus:
                raise ConfigurationFailure("message corpus is not seeded")
            outcome = engine.decide(
                user, now, self.policy, history, corpus, self._rng_for(user.user_id)
            )
            if outcome.kind == DecisionKind.PASS:
                event_id = self.store.append_event(
                    ActivityEvent(
                        client_event_id=client_event_id,
                        user_id=user.user_id,
                        popup_action=PopupAction.SHARE_NO_INTERVENTION,
                        message_id=None,
                        post_length=post_length,
                        post_hash=post_hash,
                        image_hash=image_hash,
                        timestamp=now,
                    )
                )
                return self._pass_response(event_id)
            assert outcome.token is not None
            self.store.record_token(outcome.token, attempt_event_id=client_event_id)
            return self._intervene_response(user, outcome.token)

    def _replay_share_attempt(self, user: UserAccount, client_event_id: str) -> dict | None:
        """Reproduce the original response for a retried attempt id."""
        event = self.store.find_event(client_event_id)
        if event is not None:
            if event.user_id != user.user_id:
                raise ConflictFailure("client_event_id already used by another account")
            if event.popup_action != PopupAction.SHARE_NO_INTERVENTION:
                raise ConflictFailure("client_event_id was used for a resolution event")
            return self._pass_response(event.event_id)
        token = self.store.token_for_attempt(client_event_id)
        if token is not None:
            if token.user_id != user.user_id:
                raise ConflictFailure("client_event_id already used by another account")
            return self._intervene_response(user, token)
        return None

    def _pass_response(self, event_id: int | None) -> dict:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "decision": "pass",
            "legend": engine.LEGEND,
            "event_id": event_id,
            "handoff": "simulated",
        }

    def _intervene_response(self, user: UserAccount, token: engine.InterventionToken) -> dict:
        response = {
            "protocol_version": PROTOCOL_VERSION,
            "decision": "intervene",
            "legend": engine.LEGEND,
            "intervention_token": token.token,
            "expires_at": token.expires_at.isoformat(),
        }
        if token.message_id is not None:
            message = self.store.get_message(token.message_id, user.language)
            response["message_id"] = message.message_id
            response["message_text"] = message.text
        return response

    def resolve_intervention(
        self,
        session_token: str,
        client_event_id: str,
        intervention_token: str,
        action: str,
        post_length: int,
        post_hash: str,
        image_hash: str,
    ) -> dict:
        session = self._authenticate(session_token)
        user = self.store.get_user(session.user_id)
        _validated_event_id(client_event_id)
        if post_length < 0:
            raise ValidationFailure("post_length must be >= 0")
        _validated_hash(post_hash, "post_hash")
        _validated_hash(image_hash, "image_hash")
        try:
            resolve_action = ResolveAction(action)
        except ValueError as exc:
            raise ValidationFailure(f"action must be 'edit' or 'post', got {action!r}") from exc
        now = self.now()
        with self._user_lock(user.user_id):
            self.store.expire_tokens(now)
            token = self.store.get_token(intervention_token or "")
            if token is None:
                raise NotFoundFailure("unknown intervention token")
            if token.user_id != user.user_id:
                raise AuthorizationFailure("token belongs to another account")
            existing = self.store.find_event(client_event_id)
            if existing is not None:
                if existing.user_id != user.user_id:
                    raise ConflictFailure("client_event_id already used by another account")
                return self._resolved_response(existing.popup_action, existing.event_id)
            new_state = engine.transition(token, resolve_action, now)
            if not self.store.set_token_state(token.token, TokenState.PENDING, new_state):
                raise ConflictFailure(f"token {token.token} concurrently resolved")
            popup_action = (
                PopupAction.EDIT
                if new_state == TokenState.RESOLVED_EDIT
                else PopupAction.POST
            )
            event_id = self.store.append_event(
                ActivityEvent(
                    client_event_id=client_event_id,
                    user_id=user.user_id,
                    popup_action=popup_action,
                    message_id=token.message_id,
                    post_length=post_length,
                    post_hash=post_hash,
                    image_hash=image_hash,
                    timestamp=now,
                )
            )
            return self._resolved_response(popup_action, event_id)

    def _resolved_response(self, popup_action: PopupAction, event_id: int | None) -> dict:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "status": "recorded",
            "popup_action": int(popup_action),
            "event_id": event_id,
            "handoff": "simulated",
        }

    def health(self) -> dict:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "status": "ok",
            "corpus_size": self.store.corpus_size(),
        }
