from __future__ import annotations

from datetime import datetime, timezone

import pytest

from nudgelab.corpus import load_default_corpus
from nudgelab.engine import PolicyConfig
from nudgelab.service import NudgeService
from nudgelab.simulator import SimClock
from nudgelab.store import EventStore

SIM_START = datetime(2022, 5, 2, 8, 0, tzinfo=timezone.utc)
TEST_SECRET = "test-secret"


@pytest.fixture
def store() -> EventStore:
    s = EventStore()
    s.seed_corpus(load_default_corpus())
    yield s
    s.close()


@pytest.fixture
def policy() -> PolicyConfig:
    return PolicyConfig(rng_seed=1234)


@pytest.fixture
def clock() -> SimClock:
    return SimClock(SIM_START)


@pytest.fixture
def service(store, policy, clock) -> NudgeService:
    return NudgeService(store, policy, TEST_SECRET, clock=clock)
