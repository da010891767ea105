"""Deterministic synthetic-participant driver.

Simulated agents exercise the full public API (register, login, share
attempts, pop-up decisions) against a virtual clock, one cohort per run.
Everything derives from the configured seed: agent schedules, captions,
pop-up choices, and the client event ids, so a reseeded run into a fresh
store reproduces the event export byte for byte.

Raw captions exist only inside this process; every request carries digests
computed with the same procedure the real client uses.
"""

from __future__ import annotations

import heapq
import json
import math
import random
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import httpx

from .domain import AppVariant, Language, digest_content
from .engine import PolicyConfig
from .errors import ConfigurationFailure, ValidationFailure
from .http import create_app
from .service import NudgeService
from .store import EventStore

COHORT_FILE_KEYS = {
    "n_group1",
    "n_group2",
    "experiment_days",
    "attempts_per_day_rate",
    "edit_probability",
    "change_after_edit_probability",
    "abandon_probability",
    "rng_seed",
}

_WORDS = (
    "sunset", "coffee", "beach", "friends", "party", "hiking", "city",
    "breakfast", "concert", "garden", "weekend", "puppy", "birthday",
    "lake", "museum", "snow", "pizza", "roadtrip", "festival", "morning",
)

_POST_TYPES = ("feed", "story", "direct")


@dataclass(frozen=True)
class CohortConfig:
    n_group1: int = 10
    n_group2: int = 12
    experiment_days: int = 7
    attempts_per_day_rate: float = 2.0
    edit_probability: float = 0.2
    change_after_edit_probability: float = 0.3
    abandon_probability: float = 0.05
    rng_seed: int = 7

    def __post_init__(self) -> None:
        if self.n_group1 < 0 or self.n_group2 < 0:
            raise ConfigurationFailure("group sizes must be >= 0")
        if self.experiment_days < 1:
            raise ConfigurationFailure("experiment_days must be >= 1")
        if self.attempts_per_day_rate < 0:
            raise ConfigurationFailure("attempts_per_day_rate must be >= 0")
        for name in ("edit_probability", "change_after_edit_probability", "abandon_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationFailure(f"{name} must be in [0, 1]")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "CohortConfig":
        unknown = set(data) - COHORT_FILE_KEYS
        if unknown:
            raise ConfigurationFailure(f"unknown cohort keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "CohortConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationFailure(f"bad cohort file {path}: {exc}") from exc
        return cls.from_mapping(data)


class SimClock:
    """Settable clock handed to the service; the driver advances it."""

    def __init__(self, start: datetime) -> None:
        if start.tzinfo is None:
            raise ValidationFailure("SimClock needs an aware start time")
        self._now = start

    def __call__(self) -> datetime:
        return self._now

    def set(self, now: datetime) -> None:
        self._now = now


@dataclass
class RequestRecord:
    """One captured API call, replayable against a fresh service."""

    at: str  # virtual clock reading, ISO-8601
    endpoint: str
    body: dict

    def to_json(self) -> dict:
        return {"at": self.at, "endpoint": self.endpoint, "body": self.body}

    @classmethod
    def from_json(cls, data: Mapping) -> "RequestRecord":
        return cls(at=data["at"], endpoint=data["endpoint"], body=dict(data["body"]))


class ApiClient:
    """Thin JSON client; drives either a live base URL or an in-process
    ASGI app (full HTTP stack, no socket)."""

    def __init__(self, base_url: str | None = None, app=None) -> None:
        if app is not None:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            self._client = TestClient(app, base_url="http://sim.local")
        elif base_url:
            self._client = httpx.Client(base_url=base_url)
        else:
            raise ConfigurationFailure("ApiClient needs a base_url or an app")

    def post(self, endpoint: str, body: dict) -> httpx.Response:
        return self._client.post(endpoint, json=body)

    def get(self, endpoint: str) -> httpx.Response:
        return self._client.get(endpoint)

    def close(self) -> None:
        self._client.close()


def poisson(rate: float, rng: random.Random) -> int:
    """Knuth's product method; fine for the small per-day rates used here."""
    if rate <= 0:
        return 0
    limit = math.exp(-rate)
    count = 0
    product = rng.random()
    while product > limit:
        count += 1
        product *= rng.random()
    return count


class _SimError(RuntimeError):
    pass


@dataclass
class _Agent:
    username: str
    password: str
    variant: AppVariant
    rng: random.Random
    user_id: int = 0
    session_token: str = ""
    caption: str = ""
    image: str = ""
    tallies: dict = field(default_factory=lambda: {"edits": 0, "posts": 0, "shares": 0})
    post_types: dict = field(default_factory=lambda: {t: 0 for t in _POST_TYPES})

    def compose(self) -> None:
        words = [self.rng.choice(_WORDS) for _ in range(self.rng.randint(2, 8))]
        self.caption = " ".join(words)
        self.image = f"/storage/pictures/IMG_{self.rng.randint(1000, 9999)}.jpg"

    def digests(self) -> tuple[int, str, str]:
        return (
            len(self.caption),
            digest_content(self.user_id, self.caption),
            digest_content(self.user_id, self.image),
        )

    def fresh_event_id(self) -> str:
        return str(uuid.UUID(int=self.rng.getrandbits(128), version=4))


class CohortRunner:
    """Runs one cohort chronologically; single driver thread."""

    def __init__(
        self,
        config: CohortConfig,
        client: ApiClient,
        clock: SimClock,
        start: datetime | None = None,
    ) -> None:
        self.config = config
        self.client = client
        self.clock = clock
        self.start = start or clock()
        self.requests: list[RequestRecord] = []
        self._seq = 0

    # -- transport ----------------------------------------------------------

    def _send(self, endpoint: str, body: dict) -> httpx.Response:
        self.requests.append(
            RequestRecord(at=self.clock().isoformat(), endpoint=endpoint, body=dict(body))
        )
        return self.client.post(endpoint, body)

    def _call(self, endpoint: str, body: dict, agent: "_Agent | None" = None) -> dict:
        response = self._send(endpoint, body)
        if response.status_code == 401 and agent is not None:
            # Sessions outlive 24 h only via re-login; retry once with a
            # fresh token and the same client_event_id.
            self._login(agent)
            body = dict(body, session_token=agent.session_token)
            response = self._send(endpoint, body)
        if response.status_code >= 300:
            raise _SimError(
                f"{endpoint} returned {response.status_code}: {response.text}"
                f" (body: {json.dumps(body)})"
            )
        return response.json()

    # -- agent actions --------------------------------------------------------

    def _login(self, agent: _Agent) -> None:
        logged_in = self._call(
            "/api/v1/login", {"username": agent.username, "password": agent.password}
        )
        agent.session_token = logged_in["session_token"]

    def _register_and_login(self, agent: _Agent) -> None:
        registered = self._call(
            "/api/v1/register",
            {
                "username": agent.username,
                "password": agent.password,
                "app_variant": agent.variant.value,
                "language": Language.EN.value,
            },
        )
        agent.user_id = registered["user_id"]
        self._login(agent)

    def _share(self, agent: _Agent) -> dict:
        length, post_hash, image_hash = agent.digests()
        return self._call(
            "/api/v1/share-attempt",
            {
                "session_token": agent.session_token,
                "client_event_id": agent.fresh_event_id(),
                "post_length": length,
                "post_hash": post_hash,
                "image_hash": image_hash,
                "client_timestamp": self.clock().isoformat(),
            },
            agent=agent,
        )

    def _resolve(self, agent: _Agent, token: str, action: str) -> dict:
        length, post_hash, image_hash = agent.digests()
        return self._call(
            "/api/v1/resolve",
            {
                "session_token": agent.session_token,
                "client_event_id": agent.fresh_event_id(),
                "intervention_token": token,
                "action": action,
                "post_length": length,
                "post_hash": post_hash,
                "image_hash": image_hash,
            },
            agent=agent,
        )

    def _attempt(self, agent: _Agent, queue: list, compose_fresh: bool = True) -> None:
        if compose_fresh:
            agent.compose()
        outcome = self._share(agent)
        if outcome["decision"] == "pass":
            agent.tallies["shares"] += 1
            agent.post_types[agent.rng.choice(_POST_TYPES)] += 1
            return
        token = outcome["intervention_token"]
        roll = agent.rng.random()
        if roll < self.config.abandon_probability:
            return  # walk away; the token expires on its own
        if agent.rng.random() < self.config.edit_probability:
            self._resolve(agent, token, "edit")
            agent.tallies["edits"] += 1
            if agent.rng.random() < self.config.change_after_edit_probability:
                if agent.rng.random() < 0.7:
                    agent.caption = agent.caption + " edited"
                else:
                    agent.image = f"/storage/pictures/IMG_{agent.rng.randint(1000, 9999)}.jpg"
            # Returning to the composition screen, the agent re-shares a
            # few minutes later; the gap rule makes that an action-2 event.
            retry_at = self.clock() + timedelta(minutes=agent.rng.randint(2, 10))
            self._push(queue, retry_at, agent, compose_fresh=False)
        else:
            self._resolve(agent, token, "post")
            agent.tallies["posts"] += 1
            agent.post_types[agent.rng.choice(_POST_TYPES)] += 1

    def _push(self, queue: list, at: datetime, agent: _Agent, compose_fresh: bool) -> None:
        self._seq += 1
        heapq.heappush(queue, (at, self._seq, agent, compose_fresh))

    # -- the run ---------------------------------------------------------------

    def run(self) -> dict:
        config = self.config
        master = random.Random(f"{config.rng_seed}:cohort")
        agents: list[_Agent] = []
        for i in range(config.n_group1 + config.n_group2):
            variant = AppVariant.V1 if i < config.n_group1 else AppVariant.V2
            username = f"sim-{variant.value.lower()}-{i + 1:03d}"
            agents.append(
                _Agent(
                    username=username,
                    password=f"pw-{config.rng_seed}-{i + 1:03d}-secret",
                    variant=variant,
                    rng=random.Random(f"{config.rng_seed}:agent:{username}"),
                )
            )
        for agent in agents:
            self._register_and_login(agent)

        queue: list = []
        day_zero = self.start
        for day in range(config.experiment_days):
            for agent in agents:
                n_attempts = poisson(config.attempts_per_day_rate, master)
                minutes = sorted(
                    master.randrange(8 * 60, 22 * 60) for _ in range(n_attempts)
                )
                for m in minutes:
                    at = day_zero + timedelta(days=day, minutes=m)
                    self._push(queue, at, agent, compose_fresh=True)

        while queue:
            at, _, agent, compose_fresh = heapq.heappop(queue)
            if at > self.clock():
                self.clock.set(at)
            self._attempt(agent, queue, compose_fresh=compose_fresh)

        per_user = {}
        for agent in agents:
            tallies = dict(agent.tallies)
            tallies["interventions_received"] = tallies["edits"] + tallies["posts"]
            per_user[str(agent.user_id)] = {
                "username": agent.username,
                "app_variant": agent.variant.value,
                **tallies,
                "post_types": dict(agent.post_types),
            }
        totals = {
            key: sum(u[key] for u in per_user.values())
            for key in ("edits", "posts", "shares", "interventions_received")
        }
        totals["publications"] = totals["posts"] + totals["shares"]
        return {
            "config": {
                "n_group1": config.n_group1,
                "n_group2": config.n_group2,
                "experiment_days": config.experiment_days,
                "attempts_per_day_rate": config.attempts_per_day_rate,
                "edit_probability": config.edit_probability,
                "change_after_edit_probability": config.change_after_edit_probability,
                "abandon_probability": config.abandon_probability,
                "rng_seed": config.rng_seed,
            },
            "start": self.start.isoformat(),
            "users": per_user,
            "totals": totals,
            "request_count": len(self.requests),
        }


DEFAULT_SIM_START = datetime(2022, 5, 2, 0, 0, tzinfo=timezone.utc)


def run_cohort_in_process(
    config: CohortConfig,
    store: EventStore,
    policy: PolicyConfig,
    server_secret: str,
    start: datetime = DEFAULT_SIM_START,
) -> tuple[dict, list[RequestRecord]]:
    """Convenience wrapper: host the service in-process over the given
    store and drive a full cohort through its HTTP interface."""
    clock = SimClock(start)
    service = NudgeService(store, policy, server_secret, clock=clock)
    service.require_corpus()
    client = ApiClient(app=create_app(service))
    try:
        runner = CohortRunner(config, client, clock, start=start)
        manifest = runner.run()
        return manifest, runner.requests
    finally:
        client.close()


def inject_duplicates(
    requests: Sequence[RequestRecord], duplication_rate: float, rng_seed: int
) -> list[RequestRecord]:
    """Simulate client-side retries: re-submit a seeded fraction of the
    event-bearing requests (the ones carrying a client_event_id) right
    after the original, byte-identical."""
    if not 0.0 <= duplication_rate <= 1.0:
        raise ValidationFailure("duplication_rate must be in [0, 1]")
    rng = random.Random(rng_seed)
    corrupted: list[RequestRecord] = []
    for record in requests:
        corrupted.append(record)
        if "client_event_id" not in record.body:
            continue
        if rng.random() < duplication_rate:
            corrupted.append(
                RequestRecord(at=record.at, endpoint=record.endpoint, body=dict(record.body))
            )
    return corrupted


def replay_requests(
    requests: Iterable[RequestRecord],
    store: EventStore,
    policy: PolicyConfig,
    server_secret: str,
) -> list[tuple[RequestRecord, int, dict]]:
    """Replay a captured request log against a fresh in-process service,
    advancing the virtual clock to each request's recorded time. Returns
    (request, status_code, response_body) triples."""
    requests = list(requests)
    start = (
        datetime.fromisoformat(requests[0].at) if requests else DEFAULT_SIM_START
    )
    clock = SimClock(start)
    service = NudgeService(store, policy, server_secret, clock=clock)
    client = ApiClient(app=create_app(service))
    results = []
    try:
        for record in requests:
            at = datetime.fromisoformat(record.at)
            if at > clock():
                clock.set(at)
            response = client.post(record.endpoint, record.body)
            results.append((record, response.status_code, response.json()))
    finally:
        client.close()
    return results


def save_requests(requests: Sequence[RequestRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in requests], fh, indent=0)


def load_requests(path: str | Path) -> list[RequestRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RequestRecord.from_json(item) for item in json.load(fh)]
