"""Command-line interface: corpus generation, runs, replays, and reports."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import GrsAuditError, RulesetError, RunAbortedError
from .explain import RuleSet, evaluate_ruleset, load_fixture_corpus
from .harness import ExperimentConfig, render_reports, run_experiment
from .llm import EndpointConfig
from .metrics import EvalRecord
from .scenario import generate_corpus, load_corpus, save_corpus
from .structure import classify_scenarios, load_labels, save_labels


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose: bool):
    """Audit black-box group recommenders against aggregation strategies."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("gen-corpus")
@click.option("--sizes", default="25,50,75", show_default=True, help="Comma-separated item counts.")
@click.option("--per-size", default=500, show_default=True, type=int)
@click.option("--users", default=4, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def gen_corpus(sizes: str, per_size: int, users: int, seed: int, out: str):
    """Generate a seeded scenario corpus on disk."""
    corpus = generate_corpus(_parse_int_list(sizes), per_size, seed, users)
    manifest = save_corpus(corpus, out)
    click.echo(f"wrote {len(corpus)} scenarios to {out} (manifest: {manifest})")


@main.command("classify-structure")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
def classify_structure(corpus_dir: str):
    """Label corpus groups uniform/divergent/intermediate; update the manifest."""
    corpus = load_corpus(corpus_dir)
    labels = classify_scenarios(corpus.scenarios)
    save_labels(corpus_dir, labels)
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab.label] = counts.get(lab.label, 0) + 1
    low, high = labels[0].thresholds
    click.echo(f"thresholds: low={low:.4f} high={high:.4f}")
    for name in sorted(counts):
        click.echo(f"{name}: {counts[name]}")


def _config_from_options(
    config_file: str | None,
    out: str | None,
    **overrides,
) -> ExperimentConfig:
    data: dict = {}
    if config_file:
        data = json.loads(Path(config_file).read_text())
    if out:
        data["output_dir"] = out
    if "output_dir" not in data:
        raise click.UsageError("an output directory is required (--out or config file)")
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def _run_options(fn):
    fn = click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--out", type=click.Path(file_okay=False))(fn)
    fn = click.option("--generators", help="Comma-separated generator specs.")(fn)
    fn = click.option("--strategies", help="Comma-separated strategy keys, e.g. ADD,APP(50).")(fn)
    fn = click.option("--sizes", help="Comma-separated item counts.")(fn)
    fn = click.option("--per-size", type=int)(fn)
    fn = click.option("--users", type=int)(fn)
    fn = click.option("--seed", type=int)(fn)
    fn = click.option("--k", type=int)(fn)
    fn = click.option("--gain", type=click.Choice(["binary", "linear"]))(fn)
    fn = click.option("--ruleset", type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False))(fn)
    fn = click.option("--endpoint-url", help="Chat-completions base URL for live models.")(fn)
    fn = click.option("--temperature", type=float)(fn)
    fn = click.option("--timeout", type=float)(fn)
    fn = click.option("--retries", type=int)(fn)
    return fn


def _build_and_run(replay_only: bool, config_file, out, **opts) -> None:
    endpoint_overrides = {
        "base_url": opts.pop("endpoint_url"),
        "temperature": opts.pop("temperature"),
        "timeout": opts.pop("timeout"),
        "retry_budget": opts.pop("retries"),
    }
    sizes_text = opts.pop("sizes")
    overrides = {
        "generators": _split_list(opts.pop("generators")),
        "strategies": _split_list(opts.pop("strategies")),
        "sizes": _parse_int_list(sizes_text) if sizes_text is not None else None,
        "per_size": opts.pop("per_size"),
        "num_users": opts.pop("users"),
        "master_seed": opts.pop("seed"),
        "k": opts.pop("k"),
        "gain": opts.pop("gain"),
        "ruleset_path": opts.pop("ruleset"),
        "corpus_dir": opts.pop("corpus_dir"),
    }
    config = _config_from_options(config_file, out, **overrides)
    endpoint_overrides = {k: v for k, v in endpoint_overrides.items() if v is not None}
    if endpoint_overrides:
        base = config.endpoint.to_dict() if config.endpoint else EndpointConfig.from_env().to_dict()
        base.update(endpoint_overrides)
        config.endpoint = EndpointConfig.from_dict(base)
    config.replay_only = replay_only
    try:
        artifact = run_experiment(config)
    except (RunAbortedError, GrsAuditError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        f"run complete: {len(artifact.records)} records, "
        f"{len(artifact.failures)} parse failures, reports in {artifact.run_dir / 'reports'}"
    )


def _split_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [part.strip() for part in text.split(",") if part.strip()]


@main.command("run")
@_run_options
def run(config_file, out, **opts):
    """Run an experiment (live endpoints allowed; responses are replayed when cached)."""
    _build_and_run(False, config_file, out, **opts)


@main.command("replay")
@_run_options
def replay(config_file, out, **opts):
    """Run an experiment strictly from the replay store (fully offline)."""
    _build_and_run(True, config_file, out, **opts)


@main.command("report")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
def report(run_dir: str):
    """Re-render reports from a run directory's record streams."""
    from .harness import FAILURES_FILE, RECORDS_FILE, REPORTS_DIR, VERDICTS_FILE, _read_jsonl

    root = Path(run_dir)
    records = [EvalRecord.from_dict(r) for r in _read_jsonl(root / RECORDS_FILE)]
    if not records:
        raise click.ClickException(f"no records found in {run_dir}")
    verdicts = _read_jsonl(root / VERDICTS_FILE)
    failures = _read_jsonl(root / FAILURES_FILE)
    manifest = json.loads((root / "manifest.json").read_text())
    corpus_path = manifest["corpus"]["path"]
    labels = load_labels(corpus_path)
    paths = render_reports(records, verdicts, labels, root / REPORTS_DIR, failures=failures)
    for name in sorted(paths):
        click.echo(f"wrote {paths[name]}")


@main.command("validate-ruleset")
@click.option("--ruleset", "ruleset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--fixtures", "fixtures_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-kappa", default=0.0, show_default=True, type=float)
def validate_ruleset(ruleset_path, fixtures_path, min_kappa: float):
    """Check a ruleset loads and report per-label agreement on a fixture corpus."""
    try:
        ruleset = RuleSet.load(ruleset_path) if ruleset_path else RuleSet.default()
    except RulesetError as exc:
        raise click.ClickException(f"ruleset invalid: {exc}") from exc
    fixtures = load_fixture_corpus(fixtures_path)
    kappas = evaluate_ruleset(ruleset, fixtures)
    worst = min(kappas.values()) if kappas else float("nan")
    for label in sorted(kappas):
        click.echo(f"{label}: kappa={kappas[label]:.3f}")
    click.echo(f"labels evaluated: {len(kappas)}, worst kappa: {worst:.3f}")
    if kappas and worst < min_kappa:
        raise click.ClickException(f"worst kappa {worst:.3f} below required {min_kappa}")


if __name__ == "__main__":
    main()
