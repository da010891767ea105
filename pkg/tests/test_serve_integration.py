"""Boots the real server in a subprocess: health check, live traffic over
TCP, interrupt mid-traffic, then audit the store it left behind."""

import json
import signal
import socket
import subprocess
import sys
import time
import uuid

import httpx
import pytest

from nudgelab.auditor import audit_store
from nudgelab.domain import digest_content
from nudgelab.engine import PolicyConfig
from nudgelab.store import EventStore


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def running_server(tmp_path):
    db = tmp_path / "live.sqlite"
    seed = subprocess.run(
        [sys.executable, "-m", "nudgelab", "seed-corpus", "--db", str(db)],
        capture_output=True, text=True,
    )
    assert seed.returncode == 0, seed.stderr
    port = free_port()
    process = subprocess.Popen(
        [sys.executable, "-m", "nudgelab", "serve", "--db", str(db),
         "--host", "127.0.0.1", "--port", str(port), "--secret", "live-secret"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    base = f"http://127.0.0.1:{port}"
    try:
        deadline = time.time() + 15
        while True:
            try:
                if httpx.get(f"{base}/api/v1/health", timeout=1.0).status_code == 200:
                    break
            except httpx.TransportError:
                pass
            if time.time() > deadline:
                process.kill()
                out, err = process.communicate(timeout=5)
                raise RuntimeError(f"server did not come up: {out} {err}")
            time.sleep(0.1)
        yield base, process, db
    finally:
        if process.poll() is None:
            process.kill()
            process.communicate(timeout=10)


def test_health_reports_protocol_version(running_server):
    base, _, _ = running_server
    body = httpx.get(f"{base}/api/v1/health").json()
    assert body["protocol_version"] == "1"
    assert body["corpus_size"] == 26


def test_interrupt_mid_traffic_leaves_auditable_store(running_server):
    base, process, db = running_server
    with httpx.Client(base_url=base, timeout=5.0) as client:
        registered = client.post(
            "/api/v1/register",
            json={"username": "live1", "password": "longenough",
                  "app_variant": "V2", "language": "EN"},
        ).json()
        user_id = registered["user_id"]
        session = client.post(
            "/api/v1/login", json={"username": "live1", "password": "longenough"}
        ).json()["session_token"]
        attempt = client.post(
            "/api/v1/share-attempt",
            json={
                "session_token": session,
                "client_event_id": str(uuid.uuid4()),
                "post_length": 3,
                "post_hash": digest_content(user_id, "abc"),
                "image_hash": digest_content(user_id, "i.jpg"),
                "client_timestamp": "2022-05-02T09:00:00+00:00",
            },
        ).json()
        assert attempt["decision"] == "intervene"
        client.post(
            "/api/v1/resolve",
            json={
                "session_token": session,
                "client_event_id": str(uuid.uuid4()),
                "intervention_token": attempt["intervention_token"],
                "action": "post",
                "post_length": 3,
                "post_hash": digest_content(user_id, "abc"),
                "image_hash": digest_content(user_id, "i.jpg"),
            },
        )
    process.send_signal(signal.SIGINT)
    process.communicate(timeout=15)

    store = EventStore(db)
    try:
        assert store.event_count() == 1
        assert audit_store(store, PolicyConfig()) == []
    finally:
        store.close()
