"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; a plain ``pytest`` run checks the same assertions silently.
"""

import filecmp
import math
import random
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta, timezone

import oracles
import pytest

from nudgelab.analytics.inference import GroupSummary, levene_test, pooled_t_test, summarize
from nudgelab.analytics.metrics import MetricsConfig, aggregate_counts, compute_user_metrics
from nudgelab.analytics.survey import (
    RELIABILITY_THRESHOLD,
    SurveyItemResponse,
    cronbach_alpha,
    score_survey,
)
from nudgelab.auditor import audit_display_log, audit_export_records
from nudgelab.corpus import load_default_corpus
from nudgelab.domain import (
    SCALES_BY_ID,
    ActivityEvent,
    AppVariant,
    InterventionMessage,
    Language,
    PopupAction,
    UserAccount,
    digest_content,
)
from nudgelab.engine import DecisionKind, IssuanceRecord, PolicyConfig, decide
from nudgelab.service import NudgeService
from nudgelab.simulator import CohortConfig, SimClock, inject_duplicates, replay_requests, run_cohort_in_process
from nudgelab.store import EventStore, export_events


def passed(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


# -- Table fixtures -----------------------------------------------------------

TABLE1 = {
    "#EDITS": (GroupSummary(10, 1.000, 0.816), GroupSummary(12, 0.750, 0.622)),
    "#POSTS": (GroupSummary(10, 4.300, 4.270), GroupSummary(12, 3.500, 3.778)),
    "#SHARES": (GroupSummary(10, 1.700, 2.263), GroupSummary(12, 1.333, 2.146)),
    "#PUBLICATIONS": (GroupSummary(10, 6.000, 4.190), GroupSummary(12, 4.833, 5.408)),
    "RSK": (GroupSummary(10, 4.025, 1.003), GroupSummary(12, 4.396, 1.281)),
    "CTRL": (GroupSummary(10, 4.667, 1.432), GroupSummary(12, 3.389, 1.441)),
    "BEN": (GroupSummary(10, 4.850, 0.727), GroupSummary(12, 5.313, 0.765)),
    "EIPC": (GroupSummary(10, 2.900, 1.233), GroupSummary(12, 4.111, 1.072)),
}

# Published comparison rows: t, df, p, mean diff, SE_DM, CI low/high, d.
TABLE2 = {
    "#EDITS": (0.816, 20, 0.424, 0.250, 0.307, -0.389, 0.889, 0.345),
    "#POSTS": (0.466, 20, 0.646, 0.800, 1.716, -2.779, 4.379, 0.280),
    "#SHARES": (0.389, 20, 0.701, 0.367, 0.942, -1.598, 2.331, 0.168),
    "#PUBLICATIONS": (0.556, 20, 0.584, 1.167, 2.097, -3.207, 5.541, 0.241),
    "RSK": (-0.744, 20, 0.466, -0.371, 0.499, -1.411, 0.669, -0.322),
    "CTRL": (2.077, 20, 0.051, 1.278, 0.615, -0.006, 2.561, 0.890),
    "BEN": (-1.444, 20, 0.164, -0.463, 0.320, -1.131, 0.206, -0.620),
    "EIPC": (-2.466, 20, 0.023, -1.211, 0.491, -2.236, -0.187, -1.048),
}

# Cohen's d cells asserted against the d = mean_diff / pooled-SD definition
# instead of the printed table value:
#   #POSTS: printed 0.280 is a suspected typo (no variance convention
#           reproduces it); the definition gives ~0.200.
#   EIPC:   printed -1.048 matches an average-variance d, not the pooled
#           definition used throughout (which gives ~-1.056). All six other
#           printed d cells agree with the pooled definition within +-0.005.
D_EXCEPTIONS = {
    "#POSTS": 0.19965644227124882,
    "EIPC": -1.0555681881074883,
}

TOL = 5e-3


def test_criterion_table2_reproduction():
    started = time.perf_counter()
    for variable, (g1, g2) in TABLE1.items():
        result = pooled_t_test(g1, g2)
        t, df, p, diff, se_dm, lo, hi, d = TABLE2[variable]
        assert result.t == pytest.approx(t, abs=TOL), variable
        assert result.df == df, variable
        assert result.p_two_tailed == pytest.approx(p, abs=TOL), variable
        assert result.mean_diff == pytest.approx(diff, abs=TOL), variable
        assert result.se_dm == pytest.approx(se_dm, abs=TOL), variable
        assert result.ci95[0] == pytest.approx(lo, abs=TOL), variable
        assert result.ci95[1] == pytest.approx(hi, abs=TOL), variable
        if variable in D_EXCEPTIONS:
            assert result.cohens_d == pytest.approx(D_EXCEPTIONS[variable], abs=1e-9), variable
        else:
            assert result.cohens_d == pytest.approx(d, abs=TOL), variable
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"Table 2 reproduction took {elapsed:.3f}s"
    passed(f"Table 2 reproduction ({elapsed * 1000:.0f} ms, 8 rows, "
           f"2 documented Cohen's d exceptions)")


TABLE1_SE = {
    "#EDITS": (0.258, 0.179),
    "#POSTS": (1.350, 1.091),
    "#SHARES": (0.716, 0.620),
    "#PUBLICATIONS": (1.325, 1.561),
    "RSK": (0.317, 0.370),
    "CTRL": (0.453, 0.416),
    "BEN": (0.230, 0.221),
    "EIPC": (0.390, 0.309),
}


def test_criterion_table1_internal_consistency():
    for variable, (g1, g2) in TABLE1.items():
        se1, se2 = TABLE1_SE[variable]
        assert g1.sd / math.sqrt(g1.n) == pytest.approx(se1, abs=1e-3), variable
        assert g2.sd / math.sqrt(g2.n) == pytest.approx(se2, abs=1e-3), variable
    passed("Table 1 internal consistency (SE = SD/sqrt(N) for all 16 rows)")


# -- Aggregate-count fixture ---------------------------------------------------


def _split(total: int, parts: int, cap: int) -> list[int]:
    """Spread `total` over `parts` users, none above `cap`."""
    base = [total // parts] * parts
    for i in range(total % parts):
        base[i] += 1
    assert sum(base) == total and max(base) <= cap
    return base


def _paper_shaped_store() -> EventStore:
    """22 users whose event log reproduces the study-level counts: 19
    edits, 85 posts, 33 shares, interventions 53 (G1) + 51 (G2). Raw
    per-user data is unpublished, so the distribution across users is a
    construction; only the totals are meaningful."""
    store = EventStore()
    store.seed_corpus(load_default_corpus())
    day0 = datetime(2022, 5, 2, 9, 0, tzinfo=timezone.utc)
    slots = [timedelta(days=d, minutes=90 * s) for d in range(7) for s in range(5)]

    plan = []  # (variant, interventions, edits, shares) per user
    g1_interventions = _split(53, 10, 35)
    g1_edits = _split(10, 10, 35)
    g1_shares = _split(17, 10, 35)
    for i in range(10):
        plan.append((AppVariant.V1, g1_interventions[i], g1_edits[i], g1_shares[i]))
    g2_interventions = _split(51, 12, 35)
    g2_edits = _split(9, 12, 35)
    g2_shares = _split(16, 12, 35)
    for i in range(12):
        plan.append((AppVariant.V2, g2_interventions[i], g2_edits[i], g2_shares[i]))

    for index, (variant, interventions, edits, shares) in enumerate(plan):
        assert edits <= interventions
        user = store.add_user(
            f"participant-{index + 1:02d}", "digest$1$2$3", variant, Language.EN,
            lambda uid: f"{uid:08X}",
        )

        def emit(action, at, message_id=None):
            store.append_event(
                ActivityEvent(
                    client_event_id=str(uuid.uuid4()),
                    user_id=user.user_id,
                    popup_action=action,
                    message_id=message_id,
                    post_length=4,
                    post_hash=digest_content(user.user_id, f"c{at.isoformat()}"),
                    image_hash=digest_content(user.user_id, f"i{at.isoformat()}"),
                    timestamp=at,
                )
            )

        for k in range(interventions):
            at = day0 + slots[k]
            action = PopupAction.EDIT if k < edits else PopupAction.POST
            # Message ids 1..5 rotate per day: distinct within each user-day.
            message_id = (k % 5) + 1 if variant == AppVariant.V2 else None
            emit(action, at, message_id)
        for k in range(shares):
            # Ten minutes after an intervention: a gap-blocked share.
            at = day0 + slots[k] + timedelta(minutes=10)
            emit(PopupAction.SHARE_NO_INTERVENTION, at)
    return store


def test_criterion_aggregate_count_fixture():
    store = _paper_shaped_store()
    records = store.export_records()
    per_user = []
    by_user = {}
    for record in records:
        by_user.setdefault((record.event.user_id, record.app_variant), []).append(record.event)
    for (user_id, variant), events in sorted(by_user.items()):
        per_user.append(compute_user_metrics(events, variant, MetricsConfig(7, 5)))
    totals = aggregate_counts(per_user)
    assert totals["edits"] == 19
    assert totals["posts"] == 85
    assert totals["shares"] == 33
    assert totals["publications"] == 118
    assert totals["interventions_g1"] == 53
    assert totals["interventions_g2"] == 51
    assert totals["publications"] == totals["posts"] + totals["shares"]
    assert totals["interventions"] == totals["edits"] + totals["posts"]
    for m in per_user:
        assert m.publications == m.posts + m.shares
        assert m.interventions_received == m.edits + m.posts
        assert m.interventions_received <= 35
    # The constructed log also honors the policy it claims to come from.
    assert audit_export_records(records, PolicyConfig()) == []
    store.close()
    passed("Aggregate-count fixture (19/85/33/118; interventions 53+51; identities hold)")


# -- Policy property suite -----------------------------------------------------


def test_criterion_policy_property_suite():
    started = time.perf_counter()
    policy = PolicyConfig(rng_seed=1001)
    corpus = [
        InterventionMessage(r[0], r[1], r[3], r[2]) for r in load_default_corpus()
    ]
    rng = random.Random(1001)
    day0 = datetime(2022, 5, 2, 0, 0, tzinfo=timezone.utc)
    days = 7
    users = 1430  # 1430 users x 7 days = 10010 simulated user-days
    user_days = users * days
    assert user_days >= 10_000

    total_issued = 0
    for user_index in range(users):
        variant = AppVariant.V1 if user_index % 2 else AppVariant.V2
        user = UserAccount(
            user_id=user_index + 1,
            username=f"u{user_index}",
            password_digest="d$1$2$3",
            app_variant=variant,
            language=Language.EN,
            registration_code="00000000",
            created_at=day0,
        )
        user_rng = random.Random(f"1001:{user_index}")
        attempts = []
        for day in range(days):
            for _ in range(user_rng.randint(0, 6)):
                attempts.append(
                    day0 + timedelta(days=day, minutes=user_rng.randrange(0, 24 * 60))
                )
        attempts.sort()
        history: list[IssuanceRecord] = []
        for at in attempts:
            outcome = decide(user, at, policy, history, corpus, user_rng)
            if outcome.kind != DecisionKind.INTERVENE:
                continue
            token = outcome.token
            # online checks, straight off the engine's own outputs
            same_day = [r for r in history if r.issued_at.date() == at.date()]
            assert len(same_day) < policy.max_per_day
            assert all(
                at - r.issued_at >= timedelta(minutes=60) for r in history
            )
            if variant == AppVariant.V2:
                assert token.message_id is not None
                assert token.message_id not in {
                    r.message_id for r in same_day
                }
            history.append(IssuanceRecord(token.issued_at, token.message_id))
            total_issued += 1
        # offline: the auditor re-checks the full issuance log
        displays = [
            (r.issued_at, r.message_id, f"issuance-{i}") for i, r in enumerate(history)
        ]
        assert audit_display_log(user.user_id, variant, displays, policy) == []
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"policy property suite took {elapsed:.1f}s"
    passed(
        f"Policy property suite ({user_days} user-days, {total_issued} issuances,"
        f" zero violations, {elapsed:.1f}s)"
    )


# -- Idempotency / dedup -------------------------------------------------------


def test_criterion_idempotent_dedup(tmp_path):
    policy = PolicyConfig(rng_seed=77)
    config = CohortConfig(n_group1=3, n_group2=3, experiment_days=3,
                          attempts_per_day_rate=3.0, rng_seed=77)
    store = EventStore()
    store.seed_corpus(load_default_corpus())
    _, requests = run_cohort_in_process(config, store, policy, "dedup-secret")
    clean_export = tmp_path / "clean.csv"
    export_events(store, clean_export)
    clean_count = store.event_count()
    store.close()

    corrupted = inject_duplicates(requests, 0.2, rng_seed=5)
    assert len(corrupted) > len(requests)
    dup_store = EventStore()
    dup_store.seed_corpus(load_default_corpus())
    replay_requests(corrupted, dup_store, policy, "dedup-secret")
    dup_export = tmp_path / "dup.csv"
    export_events(dup_store, dup_export)
    assert dup_store.event_count() == clean_count
    dup_store.close()
    assert filecmp.cmp(clean_export, dup_export, shallow=False)
    passed(
        f"Idempotency/dedup ({len(corrupted) - len(requests)} duplicate submissions,"
        f" store identical to clean replay, {clean_count} rows)"
    )


# -- Statistics oracle suite ----------------------------------------------------


def test_criterion_statistics_oracle_suite():
    rng = random.Random(909)
    for case in range(50):
        n1 = rng.randint(3, 18)
        n2 = rng.randint(3, 18)
        g1 = [rng.gauss(rng.uniform(-3, 3), rng.uniform(0.3, 4)) for _ in range(n1)]
        g2 = [rng.gauss(rng.uniform(-3, 3), rng.uniform(0.3, 4)) for _ in range(n2)]
        mine = pooled_t_test(summarize(g1), summarize(g2))
        ref = oracles.pooled_t_from_raw(g1, g2)
        assert mine.t == pytest.approx(ref["t"], abs=1e-6), case
        assert mine.p_two_tailed == pytest.approx(ref["p"], abs=1e-6), case
        assert mine.cohens_d == pytest.approx(ref["d"], abs=1e-6), case
        assert mine.ci95[0] == pytest.approx(ref["ci"][0], abs=1e-6), case
        assert mine.ci95[1] == pytest.approx(ref["ci"][1], abs=1e-6), case

        levene = levene_test([g1, g2])
        w_ref, _ = oracles.levene_from_raw([g1, g2])
        assert levene.w == pytest.approx(w_ref, abs=1e-9), case

        k = rng.randint(2, 8)
        n = rng.randint(4, 20)
        matrix = [[rng.uniform(1, 7) for _ in range(k)] for _ in range(n)]
        assert cronbach_alpha(matrix) == pytest.approx(
            oracles.alpha_from_covariance(matrix), abs=1e-9
        ), case
    identical = [[v] * 5 for v in (1, 4, 2, 7, 5, 3)]
    assert cronbach_alpha(identical) == 1.0
    passed("Statistics oracle suite (50 randomized datasets: t/p/d/CI at 1e-6,"
           " Levene and alpha at 1e-9, alpha(identical)=1 exactly)")


# -- Survey scoring --------------------------------------------------------------


def test_criterion_survey_scoring():
    rsk = [
        SurveyItemResponse("p1", "RSK1", 7),
        SurveyItemResponse("p1", "RSK2", 7),
        SurveyItemResponse("p1", "RSK3", 1),
    ]
    scores, _ = score_survey(rsk, [SCALES_BY_ID["RSK"]])
    assert scores[0].score == pytest.approx(1.0)

    ben = [
        SurveyItemResponse("p1", item, 7) for item in SCALES_BY_ID["BEN"].item_ids
    ]
    scores, _ = score_survey(ben, [SCALES_BY_ID["BEN"]])
    assert scores[0].score == pytest.approx(7.0)

    # The reliability flag fires exactly when alpha < 0.70.
    rng = random.Random(42)
    for _ in range(30):
        n = rng.randint(5, 25)
        noise = rng.uniform(0.0, 4.0)
        responses = []
        for i in range(n):
            latent = rng.uniform(1, 7)
            for item in SCALES_BY_ID["EIPC"].item_ids:
                value = round(min(7, max(1, latent + rng.gauss(0, noise))))
                responses.append(SurveyItemResponse(f"p{i}", item, value))
        _, reliability = score_survey(responses, [SCALES_BY_ID["EIPC"]])
        r = reliability[0]
        assert r.acceptable == (r.cronbach_alpha >= RELIABILITY_THRESHOLD)
    passed("Survey scoring (RSK reversal -> 1.0, BEN constant -> 7.0,"
           " 0.70 threshold flag exact)")


# -- Concurrency race -------------------------------------------------------------


def test_criterion_concurrency_race():
    store = EventStore()
    store.seed_corpus(load_default_corpus())
    clock = SimClock(datetime(2022, 5, 2, 8, 0, tzinfo=timezone.utc))
    service = NudgeService(store, PolicyConfig(rng_seed=8), "race-secret", clock=clock)
    user_id = service.register("racer", "longpassword", "V2", "EN")["user_id"]
    session = service.login("racer", "longpassword")["session_token"]

    def attempt():
        return service.share_attempt(
            session_token=session,
            client_event_id=str(uuid.uuid4()),
            post_length=2,
            post_hash=digest_content(user_id, "hi"),
            image_hash=digest_content(user_id, "p.jpg"),
            client_timestamp=service.now().isoformat(),
        )

    for i in range(4):
        clock.set(datetime(2022, 5, 2, 8, 0, tzinfo=timezone.utc) + timedelta(minutes=61 * i))
        assert attempt()["decision"] == "intervene"
    clock.set(datetime(2022, 5, 2, 8, 0, tzinfo=timezone.utc) + timedelta(minutes=61 * 4))

    barrier = threading.Barrier(2)

    def racing_attempt(_):
        barrier.wait()
        return attempt()

    with ThreadPoolExecutor(max_workers=2) as pool:
        outcomes = list(pool.map(racing_attempt, range(2)))
    decisions = sorted(o["decision"] for o in outcomes)
    assert decisions == ["intervene", "pass"], decisions
    tokens = store.user_tokens(user_id)
    assert len(tokens) == 5
    store.close()
    passed("Concurrency race (one slot left: exactly one INTERVENE, one PASS)")
