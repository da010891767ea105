"""Durable, idempotent persistence: users, message corpus, activity events,
and intervention tokens, on an embedded SQLite database.

The schema mirrors the five-table events database (users_table,
interventions, intervention_categories, popup_actions, user_activity) plus
one auxiliary token table. Every activity append is idempotent on the
client-generated event id, which remediates duplicate rows caused by
client-side retries.
"""

from __future__ import annotations

import csv
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .domain import (
    CATEGORY_NAMES,
    CORPUS_SIZE,
    POPUP_ACTION_DESCRIPTIONS,
    ActivityEvent,
    AppVariant,
    InterventionMessage,
    Language,
    PopupAction,
    UserAccount,
    parse_timestamp,
    utc_now,
)
from .engine import InterventionToken, IssuanceRecord, PolicyConfig, TokenState, summarize_history
from .errors import ConflictFailure, NotFoundFailure, ValidationFailure

EXPORT_FORMAT_VERSION = 1

EXPORT_COLUMNS = (
    "event_id",
    "client_event_id",
    "user_id",
    "app_variant",
    "popup_action",
    "message_id",
    "post_length",
    "post_hash",
    "image_hash",
    "timestamp_iso8601",
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users_table (
    user_id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    password_digest TEXT NOT NULL,
    app_variant TEXT NOT NULL CHECK (app_variant IN ('V1', 'V2')),
    language TEXT NOT NULL CHECK (language IN ('EN', 'DE')),
    registration_code TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS intervention_categories (
    category_id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS interventions (
    message_id INTEGER PRIMARY KEY,
    category_id INTEGER NOT NULL REFERENCES intervention_categories(category_id),
    risk_value REAL NOT NULL CHECK (risk_value >= 0),
    text_en TEXT NOT NULL,
    text_de TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS popup_actions (
    action_id INTEGER PRIMARY KEY CHECK (action_id IN (0, 1, 2)),
    description TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS user_activity (
    event_id INTEGER PRIMARY KEY AUTOINCREMENT,
    client_event_id TEXT NOT NULL UNIQUE,
    user_id INTEGER NOT NULL REFERENCES users_table(user_id),
    popup_action INTEGER NOT NULL REFERENCES popup_actions(action_id),
    message_id INTEGER REFERENCES interventions(message_id),
    post_length INTEGER NOT NULL CHECK (post_length >= 0),
    post_hash TEXT NOT NULL,
    image_hash TEXT NOT NULL,
    timestamp TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_activity_user_ts ON user_activity(user_id, timestamp);
CREATE TABLE IF NOT EXISTS intervention_tokens (
    token TEXT PRIMARY KEY,
    attempt_event_id TEXT NOT NULL UNIQUE,
    user_id INTEGER NOT NULL REFERENCES users_table(user_id),
    message_id INTEGER REFERENCES interventions(message_id),
    issued_at TEXT NOT NULL,
    expires_at TEXT NOT NULL,
    state TEXT NOT NULL CHECK (state IN ('PENDING', 'RESOLVED_EDIT', 'RESOLVED_POST', 'EXPIRED'))
);
CREATE INDEX IF NOT EXISTS idx_tokens_user ON intervention_tokens(user_id, issued_at);
"""


@dataclass(frozen=True)
class ExportRecord:
    """One export row: the event plus the owning account's app variant."""

    event: ActivityEvent
    app_variant: AppVariant


class EventStore:
    """Single-writer relational store. All methods are thread-safe; writes
    for one user are additionally serialized by the service layer."""

    def __init__(self, path: str | Path = ":memory:") -> None:
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys = ON")
        with self._lock:
            self._conn.executescript(_SCHEMA)
            for action_id, description in POPUP_ACTION_DESCRIPTIONS.items():
                self._conn.execute(
                    "INSERT OR IGNORE INTO popup_actions(action_id, description) VALUES (?, ?)",
                    (action_id, description),
                )
            self._conn.commit()

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- users ----------------------------------------------------------

    def add_user(
        self,
        username: str,
        password_digest: str,
        app_variant: AppVariant,
        language: Language,
        code_factory: Callable[[int], str],
    ) -> UserAccount:
        """Insert an account; the registration code needs the assigned id,
        so it is derived inside the same transaction."""
        if not username:
            raise ValidationFailure("username must be nonempty")
        created_at = utc_now()
        with self._lock:
            try:
                cur = self._conn.execute(
                    "INSERT INTO users_table(username, password_digest, app_variant,"
                    " language, created_at) VALUES (?, ?, ?, ?, ?)",
                    (
                        username,
                        password_digest,
                        app_variant.value,
                        language.value,
                        created_at.isoformat(),
                    ),
                )
            except sqlite3.IntegrityError as exc:
                self._conn.rollback()
                raise ConflictFailure(f"username {username!r} already registered") from exc
            user_id = int(cur.lastrowid)
            code = code_factory(user_id)
            self._conn.execute(
                "UPDATE users_table SET registration_code = ? WHERE user_id = ?",
                (code, user_id),
            )
            self._conn.commit()
        return UserAccount(
            user_id=user_id,
            username=username,
            password_digest=password_digest,
            app_variant=app_variant,
            language=language,
            registration_code=code,
            created_at=created_at,
        )

    def get_user(self, user_id: int) -> UserAccount:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM users_table WHERE user_id = ?", (user_id,)
            ).fetchone()
        if row is None:
            raise NotFoundFailure(f"no user with id {user_id}")
        return self._user_from_row(row)

    def find_user(self, username: str) -> UserAccount | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM users_table WHERE username = ?", (username,)
            ).fetchone()
        return self._user_from_row(row) if row else None

    def all_users(self) -> list[UserAccount]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM users_table ORDER BY user_id"
            ).fetchall()
        return [self._user_from_row(r) for r in rows]

    @staticmethod
    def _user_from_row(row: sqlite3.Row) -> UserAccount:
        return UserAccount(
            user_id=row["user_id"],
            username=row["username"],
            password_digest=row["password_digest"],
            app_variant=AppVariant(row["app_variant"]),
            language=Language(row["language"]),
            registration_code=row["registration_code"],
            created_at=parse_timestamp(row["created_at"]),
        )

    # -- corpus ---------------------------------------------------------

    def seed_corpus(self, rows: Sequence[tuple[int, int, float, str, str]]) -> int:
        """Load the message corpus: (message_id, category_id, risk_value,
        text_en, text_de) per row. Replaces any previous corpus atomically
        and insists on the full 26-message / 6-category shape."""
        ids = [r[0] for r in rows]
        if sorted(ids) != list(range(1, CORPUS_SIZE + 1)):
            raise ValidationFailure(
                f"corpus must contain message_ids 1..{CORPUS_SIZE} exactly once"
            )
        categories = {r[1] for r in rows}
        if not categories <= set(CATEGORY_NAMES):
            raise ValidationFailure(
                f"corpus references unknown categories: {sorted(categories - set(CATEGORY_NAMES))}"
            )
        if categories != set(CATEGORY_NAMES):
            raise ValidationFailure("corpus must use all 6 categories")
        for r in rows:
            if r[2] < 0:
                raise ValidationFailure(f"message {r[0]}: risk_value must be >= 0")
        with self._lock:
            self._conn.execute("DELETE FROM interventions")
            self._conn.execute("DELETE FROM intervention_categories")
            self._conn.executemany(
                "INSERT INTO intervention_categories(category_id, name) VALUES (?, ?)",
                sorted(CATEGORY_NAMES.items()),
            )
            self._conn.executemany(
                "INSERT INTO interventions(message_id, category_id, risk_value, text_en, text_de)"
                " VALUES (?, ?, ?, ?, ?)",
                rows,
            )
            self._conn.commit()
        return len(rows)

    def corpus_size(self) -> int:
        with self._lock:
            (count,) = self._conn.execute("SELECT COUNT(*) FROM interventions").fetchone()
        return int(count)

    def corpus_for(self, language: Language) -> list[InterventionMessage]:
        column = "text_en" if language == Language.EN else "text_de"
        with self._lock:
            rows = self._conn.execute(
                f"SELECT message_id, category_id, risk_value, {column} AS text"
                " FROM interventions ORDER BY message_id"
            ).fetchall()
        return [
            InterventionMessage(
                message_id=r["message_id"],
                category_id=r["category_id"],
                text=r["text"],
                risk_value=r["risk_value"],
            )
            for r in rows
        ]

    def get_message(self, message_id: int, language: Language) -> InterventionMessage:
        column = "text_en" if language == Language.EN else "text_de"
        with self._lock:
            row = self._conn.execute(
                f"SELECT message_id, category_id, risk_value, {column} AS text"
                " FROM interventions WHERE message_id = ?",
                (message_id,),
            ).fetchone()
        if row is None:
            raise NotFoundFailure(f"no message with id {message_id}")
        return InterventionMessage(
            message_id=row["message_id"],
            category_id=row["category_id"],
            text=row["text"],
            risk_value=row["risk_value"],
        )

    # -- activity events --------------------------------------------------

    def append_event(self, event: ActivityEvent) -> int:
        """Persist one event; resubmissions with a known client_event_id
        return the original event_id without writing."""
        event.validated()
        with self._lock:
            existing = self._conn.execute(
                "SELECT event_id FROM user_activity WHERE client_event_id = ?",
                (event.client_event_id,),
            ).fetchone()
            if existing is not None:
                return int(existing["event_id"])
            user = self.get_user(event.user_id)  # raises NotFoundFailure
            if event.popup_action in (PopupAction.EDIT, PopupAction.POST):
                if user.app_variant == AppVariant.V2 and event.message_id is None:
                    raise ValidationFailure(
                        "V2 interventions must record the displayed message_id"
                    )
                if user.app_variant == AppVariant.V1 and event.message_id is not None:
                    raise ValidationFailure(
                        "V1 pop-ups display no message; message_id must be absent"
                    )
            try:
                cur = self._conn.execute(
                    "INSERT INTO user_activity(client_event_id, user_id, popup_action,"
                    " message_id, post_length, post_hash, image_hash, timestamp)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        event.client_event_id,
                        event.user_id,
                        int(event.popup_action),
                        event.message_id,
                        event.post_length,
                        event.post_hash,
                        event.image_hash,
                        event.timestamp.isoformat(),
                    ),
                )
            except sqlite3.IntegrityError as exc:
                self._conn.rollback()
                raise ValidationFailure(f"event violates referential integrity: {exc}") from exc
            self._conn.commit()
            return int(cur.lastrowid)

    def find_event(self, client_event_id: str) -> ActivityEvent | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM user_activity WHERE client_event_id = ?",
                (client_event_id,),
            ).fetchone()
        return self._event_from_row(row) if row else None

    def query_user_events(
        self,
        user_id: int,
        start: datetime | None = None,
        end: datetime | None = None,
    ) -> list[ActivityEvent]:
        """Events of one user, ascending by timestamp then event_id.

        ``start``/``end`` bound the range inclusively on both sides.
        """
        self.get_user(user_id)  # raises NotFoundFailure for unknown users
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM user_activity WHERE user_id = ?", (user_id,)
            ).fetchall()
        events = [self._event_from_row(r) for r in rows]
        if start is not None:
            events = [e for e in events if e.timestamp >= start]
        if end is not None:
            events = [e for e in events if e.timestamp <= end]
        events.sort(key=lambda e: (e.timestamp, e.event_id))
        return events

    def event_count(self) -> int:
        with self._lock:
            (count,) = self._conn.execute("SELECT COUNT(*) FROM user_activity").fetchone()
        return int(count)

    def export_records(self) -> list[ExportRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT a.*, u.app_variant AS app_variant FROM user_activity a"
                " JOIN users_table u ON u.user_id = a.user_id"
                " ORDER BY a.event_id"
            ).fetchall()
        return [
            ExportRecord(
                event=self._event_from_row(row),
                app_variant=AppVariant(row["app_variant"]),
            )
            for row in rows
        ]

    @staticmethod
    def _event_from_row(row: sqlite3.Row) -> ActivityEvent:
        return ActivityEvent(
            event_id=row["event_id"],
            client_event_id=row["client_event_id"],
            user_id=row["user_id"],
            popup_action=PopupAction(row["popup_action"]),
            message_id=row["message_id"],
            post_length=row["post_length"],
            post_hash=row["post_hash"],
            image_hash=row["image_hash"],
            timestamp=parse_timestamp(row["timestamp"]),
        )

    # -- intervention tokens ----------------------------------------------

    def record_token(self, token: InterventionToken, attempt_event_id: str) -> None:
        """Persist a freshly issued token, keyed also by the share-attempt
        id so retried attempts can recover the same pop-up."""
        with self._lock:
            try:
                self._conn.execute(
                    "INSERT INTO intervention_tokens(token, attempt_event_id, user_id,"
                    " message_id, issued_at, expires_at, state) VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        token.token,
                        attempt_event_id,
                        token.user_id,
                        token.message_id,
                        token.issued_at.isoformat(),
                        token.expires_at.isoformat(),
                        token.state.value,
                    ),
                )
            except sqlite3.IntegrityError as exc:
                self._conn.rollback()
                raise ConflictFailure(f"token or attempt id already recorded: {exc}") from exc
            self._conn.commit()

    def get_token(self, token_id: str) -> InterventionToken | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM intervention_tokens WHERE token = ?", (token_id,)
            ).fetchone()
        return self._token_from_row(row) if row else None

    def token_for_attempt(self, attempt_event_id: str) -> InterventionToken | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM intervention_tokens WHERE attempt_event_id = ?",
                (attempt_event_id,),
            ).fetchone()
        return self._token_from_row(row) if row else None

    def set_token_state(self, token_id: str, expected: TokenState, new: TokenState) -> bool:
        """Atomic compare-and-set; False means the token was not in the
        expected state (or does not exist)."""
        with self._lock:
            cur = self._conn.execute(
                "UPDATE intervention_tokens SET state = ? WHERE token = ? AND state = ?",
                (new.value, token_id, expected.value),
            )
            self._conn.commit()
            return cur.rowcount == 1

    def expire_tokens(self, now: datetime) -> int:
        """Transition every PENDING token past its TTL to EXPIRED."""
        with self._lock:
            cur = self._conn.execute(
                "UPDATE intervention_tokens SET state = 'EXPIRED'"
                " WHERE state = 'PENDING' AND expires_at <= ?",
                (now.isoformat(),),
            )
            self._conn.commit()
            return cur.rowcount

    def user_tokens(self, user_id: int) -> list[InterventionToken]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM intervention_tokens WHERE user_id = ? ORDER BY issued_at",
                (user_id,),
            ).fetchall()
        return [self._token_from_row(r) for r in rows]

    def all_tokens(self) -> list[InterventionToken]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM intervention_tokens ORDER BY user_id, issued_at"
            ).fetchall()
        return [self._token_from_row(r) for r in rows]

    def issuance_history(self, user_id: int) -> list[IssuanceRecord]:
        return [
            IssuanceRecord(issued_at=t.issued_at, message_id=t.message_id)
            for t in self.user_tokens(user_id)
        ]

    def interventions_today(
        self, user_id: int, now: datetime, config: PolicyConfig
    ) -> tuple[int, datetime | None, set[int]]:
        """(count issued in the calendar day of `now`, most recent issuance
        ever, message ids shown today) for budget/gap/no-repeat checks."""
        self.get_user(user_id)
        return summarize_history(self.issuance_history(user_id), now, config)

    @staticmethod
    def _token_from_row(row: sqlite3.Row) -> InterventionToken:
        return InterventionToken(
            token=row["token"],
            user_id=row["user_id"],
            message_id=row["message_id"],
            issued_at=parse_timestamp(row["issued_at"]),
            expires_at=parse_timestamp(row["expires_at"]),
            state=TokenState(row["state"]),
        )


# -- export file format ----------------------------------------------------


def write_export(records: Iterable[ExportRecord], destination: str | Path) -> int:
    """Write export rows as delimited text; returns the row count.

    Format version 1: CSV, header exactly EXPORT_COLUMNS, empty field for
    an absent message_id, timestamps ISO-8601 with explicit UTC offset.
    """
    count = 0
    with open(destination, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPORT_COLUMNS)
        for record in records:
            e = record.event
            writer.writerow(
                [
                    e.event_id,
                    e.client_event_id,
                    e.user_id,
                    record.app_variant.value,
                    int(e.popup_action),
                    "" if e.message_id is None else e.message_id,
                    e.post_length,
                    e.post_hash,
                    e.image_hash,
                    e.timestamp.isoformat(),
                ]
            )
            count += 1
    return count


def export_events(store: EventStore, destination: str | Path) -> int:
    return write_export(store.export_records(), destination)


def read_export(source: str | Path) -> list[ExportRecord]:
    """Parse an export file back into records, validating every field."""
    records: list[ExportRecord] = []
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(EXPORT_COLUMNS):
            raise ValidationFailure(
                f"{source}: unexpected export header {header!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(EXPORT_COLUMNS):
                raise ValidationFailure(
                    f"{source}, line {line_no}: expected {len(EXPORT_COLUMNS)} fields,"
                    f" got {len(row)}"
                )
            try:
                event = ActivityEvent(
                    event_id=int(row[0]),
                    client_event_id=row[1],
                    user_id=int(row[2]),
                    popup_action=PopupAction(int(row[4])),
                    message_id=int(row[5]) if row[5] else None,
                    post_length=int(row[6]),
                    post_hash=row[7],
                    image_hash=row[8],
                    timestamp=parse_timestamp(row[9]),
                ).validated()
                variant = AppVariant(row[3])
            except (ValueError, ValidationFailure) as exc:
                raise ValidationFailure(f"{source}, line {line_no}: {exc}") from exc
            records.append(ExportRecord(event=event, app_variant=variant))
    return records
