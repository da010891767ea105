"""Operator command line: run the service, seed the corpus, simulate
cohorts, export events, run the analytics pipeline, and audit histories.

Exit codes: 0 success, 1 usage error, 2 validation/configuration error,
3 I/O error, 4 audit violations found.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import simulator as sim
from .analytics import (
    build_report_from_records,
    build_report_from_summaries,
    read_summaries_file,
    read_survey_file,
    render_document_json,
    score_survey,
)
from .analytics.metrics import MetricsConfig
from .auditor import Violation, audit_export, audit_store
from .corpus import load_default_corpus, parse_corpus_file
from .engine import PolicyConfig
from .errors import ConfigurationFailure, NudgeLabError, ValidationFailure
from .http import create_app
from .service import NudgeService
from .store import EventStore, export_events, read_export

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_AUDIT = 4


class AuditViolationsFound(Exception):
    def __init__(self, violations: list[Violation]) -> None:
        super().__init__(f"{len(violations)} violation(s)")
        self.violations = violations


def _load_policy(policy_path: str | None, **overrides) -> PolicyConfig:
    """File values first, then any non-None CLI overrides on top."""
    if policy_path:
        policy = PolicyConfig.from_file(policy_path)
    else:
        policy = PolicyConfig()
    effective = {k: v for k, v in overrides.items() if v is not None}
    if effective:
        policy = PolicyConfig(**(policy.__dict__ | effective))
    return policy


_POLICY_FLAGS = [
    click.option("--max-per-day", "max_per_day", type=int, default=None,
                 help="Daily intervention budget per user."),
    click.option("--min-gap-minutes", "min_gap_minutes", type=int, default=None,
                 help="Minimum minutes between interventions."),
    click.option("--token-ttl-minutes", "token_ttl_minutes", type=int, default=None,
                 help="Pop-up lifetime before it expires unresolved."),
    click.option("--day-boundary-timezone", "day_boundary_timezone", default=None,
                 help="IANA zone for the calendar-day budget."),
    click.option("--rng-seed", "rng_seed", type=int, default=None,
                 help="Seed for deterministic message selection."),
]


def _with_policy_flags(command):
    for flag in reversed(_POLICY_FLAGS):
        command = flag(command)
    return command


@click.group()
def cli() -> None:
    """nudgelab: preventative-nudge experiment platform."""


@cli.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Service config file (JSON: db_path, bind_host, bind_port, server_secret, policy_path).")
@click.option("--db", "db_path", type=click.Path(dir_okay=False), help="SQLite database path.")
@click.option("--policy", "policy_path", type=click.Path(exists=True, dir_okay=False),
              help="Policy config file (JSON).")
@click.option("--host", default=None, help="Bind address.")
@click.option("--port", default=None, type=int, help="Bind port.")
@click.option("--secret", default=None, help="Server secret for registration codes.")
@_with_policy_flags
def serve(config_path, db_path, policy_path, host, port, secret,
          max_per_day, min_gap_minutes, token_ttl_minutes,
          day_boundary_timezone, rng_seed) -> None:
    """Run the intervention service (blocks until interrupted).

    Precedence: built-in defaults < config file < environment
    (NUDGELAB_BIND_HOST, NUDGELAB_BIND_PORT, NUDGELAB_SECRET,
    NUDGELAB_POLICY) < command-line flags.
    """
    import uvicorn

    settings = {
        "db_path": "nudgelab.sqlite",
        "bind_host": "127.0.0.1",
        "bind_port": 8000,
        "server_secret": None,
        "policy_path": None,
    }
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            try:
                file_settings = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationFailure(f"bad service config {config_path}: {exc}") from exc
        unknown = set(file_settings) - set(settings)
        if unknown:
            raise ConfigurationFailure(f"unknown service config keys: {sorted(unknown)}")
        settings.update(file_settings)
    env = os.environ
    if env.get("NUDGELAB_BIND_HOST"):
        settings["bind_host"] = env["NUDGELAB_BIND_HOST"]
    if env.get("NUDGELAB_BIND_PORT"):
        settings["bind_port"] = int(env["NUDGELAB_BIND_PORT"])
    if env.get("NUDGELAB_SECRET"):
        settings["server_secret"] = env["NUDGELAB_SECRET"]
    if env.get("NUDGELAB_POLICY"):
        settings["policy_path"] = env["NUDGELAB_POLICY"]
    if db_path:
        settings["db_path"] = db_path
    if policy_path:
        settings["policy_path"] = policy_path
    if host:
        settings["bind_host"] = host
    if port is not None:
        settings["bind_port"] = port
    if secret:
        settings["server_secret"] = secret
    if not settings["server_secret"]:
        raise ConfigurationFailure(
            "server secret is required (--secret, NUDGELAB_SECRET, or config file)"
        )

    store = EventStore(settings["db_path"])
    policy = _load_policy(
        settings["policy_path"],
        max_per_day=max_per_day,
        min_gap_minutes=min_gap_minutes,
        token_ttl_minutes=token_ttl_minutes,
        day_boundary_timezone=day_boundary_timezone,
        rng_seed=rng_seed,
    )
    service = NudgeService(store, policy, settings["server_secret"])
    service.require_corpus()  # fail fast: V2 registrations need messages
    app = create_app(service)
    click.echo(
        f"serving on {settings['bind_host']}:{settings['bind_port']}"
        f" (db: {settings['db_path']})"
    )
    try:
        uvicorn.run(
            app, host=settings["bind_host"], port=settings["bind_port"], log_level="warning"
        )
    finally:
        store.close()


@cli.command("seed-corpus")
@click.option("--db", "db_path", required=True, type=click.Path(dir_okay=False))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False),
              help="Corpus TSV (message_id, category_id, risk_value, text_en, text_de);"
                   " defaults to the packaged placeholder corpus.")
def seed_corpus(db_path, corpus_path) -> None:
    """Load the 26-message intervention corpus into the store."""
    rows = parse_corpus_file(corpus_path) if corpus_path else load_default_corpus()
    store = EventStore(db_path)
    try:
        count = store.seed_corpus(rows)
    finally:
        store.close()
    click.echo(f"seeded {count} messages in 6 categories")


@cli.command("simulate")
@click.option("--db", "db_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Cohort config file (JSON).")
@click.option("--policy", "policy_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-group1", type=int, default=None)
@click.option("--n-group2", type=int, default=None)
@click.option("--days", type=int, default=None)
@click.option("--rate", type=float, default=None, help="Mean share attempts per user-day.")
@click.option("--seed", type=int, default=None)
@click.option("--secret", default="simulation-secret")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False),
              help="Write the run manifest (JSON) here.")
@click.option("--export", "export_path", type=click.Path(dir_okay=False),
              help="Also export the resulting events here.")
@click.option("--requests-log", "requests_path", type=click.Path(dir_okay=False),
              help="Save the raw request log (JSON) for replay experiments.")
def simulate(db_path, config_path, policy_path, n_group1, n_group2, days, rate, seed,
             secret, manifest_path, export_path, requests_path) -> None:
    """Drive a synthetic cohort through the full API into a fresh store."""
    config = sim.CohortConfig.from_file(config_path) if config_path else sim.CohortConfig()
    overrides = {}
    if n_group1 is not None:
        overrides["n_group1"] = n_group1
    if n_group2 is not None:
        overrides["n_group2"] = n_group2
    if days is not None:
        overrides["experiment_days"] = days
    if rate is not None:
        overrides["attempts_per_day_rate"] = rate
    if seed is not None:
        overrides["rng_seed"] = seed
    if overrides:
        base = config.__dict__ | overrides
        config = sim.CohortConfig(**base)
    if Path(db_path).exists():
        raise ValidationFailure(
            f"{db_path} already exists; simulate needs a fresh store"
        )
    store = EventStore(db_path)
    try:
        store.seed_corpus(load_default_corpus())
        policy = _load_policy(policy_path, rng_seed=config.rng_seed)
        manifest, requests = sim.run_cohort_in_process(config, store, policy, secret)
        if manifest_path:
            with open(manifest_path, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
        if export_path:
            export_events(store, export_path)
        if requests_path:
            sim.save_requests(requests, requests_path)
    finally:
        store.close()
    totals = manifest["totals"]
    click.echo(
        f"simulated {len(manifest['users'])} users over {config.experiment_days} days:"
        f" edits={totals['edits']} posts={totals['posts']} shares={totals['shares']}"
        f" (requests: {manifest['request_count']})"
    )


@cli.command("export")
@click.option("--db", "db_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def export(db_path, out_path) -> None:
    """Write all activity events as delimited text."""
    store = EventStore(db_path)
    try:
        count = export_events(store, out_path)
    finally:
        store.close()
    click.echo(f"exported {count} events to {out_path}")


@cli.command("report")
@click.option("--events", "events_path", type=click.Path(exists=True, dir_okay=False),
              help="Event export file (full pipeline).")
@click.option("--summaries", "summaries_path", type=click.Path(exists=True, dir_okay=False),
              help="Published summary rows (comparison tables only).")
@click.option("--survey", "survey_path", type=click.Path(exists=True, dir_okay=False),
              help="Survey responses (participant_id, item_id, value).")
@click.option("--days", type=int, default=7, show_default=True,
              help="Experiment length for the exposure denominator.")
@click.option("--max-per-day", type=int, default=5, show_default=True)
@click.option("--pairing-window", type=int, default=30, show_default=True,
              help="Minutes within which an edit pairs with its follow-up.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write the text report here (default: stdout).")
@click.option("--json-out", "json_path", type=click.Path(dir_okay=False),
              help="Write the machine-readable results document here.")
def report(events_path, summaries_path, survey_path, days, max_per_day,
           pairing_window, out_path, json_path) -> None:
    """Run the analytics pipeline and render the result tables."""
    if bool(events_path) == bool(summaries_path):
        raise click.UsageError("provide exactly one of --events or --summaries")
    if events_path:
        records = read_export(events_path)
        survey_responses = read_survey_file(survey_path) if survey_path else []
        config = MetricsConfig(
            experiment_days=days,
            max_per_day=max_per_day,
            pairing_window_minutes=pairing_window,
        )
        text, doc = build_report_from_records(records, config, survey_responses)
    else:
        rows = read_summaries_file(summaries_path)
        text, doc = build_report_from_summaries(rows)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if json_path:
        Path(json_path).write_text(render_document_json(doc), encoding="utf-8")


@cli.command("survey-score")
@click.option("--survey", "survey_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--json-out", "json_path", type=click.Path(dir_okay=False))
def survey_score(survey_path, json_path) -> None:
    """Score the survey constructs and report scale reliability."""
    responses = read_survey_file(survey_path)
    scores, reliability = score_survey(responses)
    click.echo(f"{'participant':<16} {'scale':<6} {'score':>7}")
    for s in scores:
        click.echo(f"{s.participant_id:<16} {s.scale_id:<6} {s.score:>7.3f}")
    click.echo("")
    click.echo(f"{'scale':<6} {'alpha':>7} {'items':>6} {'respondents':>12} {'acceptable':>11}")
    for r in reliability:
        click.echo(
            f"{r.scale_id:<6} {r.cronbach_alpha:>7.3f} {r.item_count:>6}"
            f" {r.respondent_count:>12} {'yes' if r.acceptable else 'NO':>11}"
        )
    if json_path:
        doc = {
            "scores": [
                {"participant_id": s.participant_id, "scale_id": s.scale_id, "score": s.score}
                for s in scores
            ],
            "reliability": [
                {
                    "scale_id": r.scale_id,
                    "cronbach_alpha": r.cronbach_alpha,
                    "item_count": r.item_count,
                    "respondent_count": r.respondent_count,
                    "acceptable": r.acceptable,
                }
                for r in reliability
            ],
        }
        Path(json_path).write_text(render_document_json(doc), encoding="utf-8")


@cli.command("audit")
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--events", "events_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", "policy_path", type=click.Path(exists=True, dir_okay=False))
def audit(db_path, events_path, policy_path) -> None:
    """Re-check every policy invariant over the full history."""
    if bool(db_path) == bool(events_path):
        raise click.UsageError("provide exactly one of --db or --events")
    policy = _load_policy(policy_path)
    if db_path:
        store = EventStore(db_path)
        try:
            violations = audit_store(store, policy)
        finally:
            store.close()
    else:
        violations = audit_export(events_path, policy)
    if violations:
        for v in violations:
            click.echo(str(v))
        raise AuditViolationsFound(violations)
    click.echo("audit passed: no violations")


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping failures to documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except AuditViolationsFound as exc:
        click.echo(f"audit failed: {exc}", err=True)
        return EXIT_AUDIT
    except NudgeLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
