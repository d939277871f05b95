"""End-to-end experiment orchestration and report rendering."""

from __future__ import annotations

import datetime as _dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .aggregation import (
    DEFAULT_K,
    RankedList,
    Strategy,
    aggregate,
    random_recommendation,
    strategy_scores,
)
from .errors import RunAbortedError, TransportError
from .explain import ExplanationVerdict, RuleSet, classify_explanation
from .llm import (
    EndpointConfig,
    GeneratorResponse,
    ReplayStore,
    build_prompt,
    parse_response,
    query_endpoint,
    synthetic_generator,
)
from .metrics import GAIN_BINARY, GAIN_MODES, DeltaReport, EvalRecord, delta_ndcg, ndcg_at_k, summarize
from .scenario import (
    DEFAULT_NUM_USERS,
    GroupScenario,
    ScenarioCorpus,
    corpus_digest,
    generate_corpus,
    load_corpus,
    save_corpus,
)
from .seeds import derive_seed, stable_hash64
from .structure import DIVERGENT, UNIFORM, GroupStructureLabel, classify_scenarios, load_labels, save_labels

log = logging.getLogger(__name__)

GENERATOR_RANDOM = "random"
SYNTHETIC_PREFIX = "synthetic:"

RECORDS_FILE = "records.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
FAILURES_FILE = "failures.jsonl"
MANIFEST_FILE = "manifest.json"
REPORTS_DIR = "reports"


@dataclass
class ExperimentConfig:
    """Everything one experiment run needs; JSON round-trippable."""

    output_dir: str
    sizes: list[int] = field(default_factory=lambda: [25, 50, 75])
    per_size: int = 500
    num_users: int = DEFAULT_NUM_USERS
    master_seed: int = 1
    generators: list[str] = field(default_factory=lambda: [GENERATOR_RANDOM])
    strategies: list[Strategy] = field(
        default_factory=lambda: [Strategy("ADD"), Strategy("MPL"), Strategy("LMS"), Strategy("APP")]
    )
    k: int = DEFAULT_K
    gain: str = GAIN_BINARY
    ruleset_path: str | None = None
    corpus_dir: str | None = None
    endpoint: EndpointConfig | None = None
    replay_only: bool = False

    def __post_init__(self):
        if not self.generators:
            raise ValueError("need at least one generator")
        if not self.strategies:
            raise ValueError("need at least one strategy")
        if not self.sizes:
            raise ValueError("need at least one scenario size")
        if self.per_size < 1:
            raise ValueError("per_size must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > min(self.sizes):
            raise ValueError(f"k={self.k} exceeds smallest item count {min(self.sizes)}")
        if self.gain not in GAIN_MODES:
            raise ValueError(f"gain must be one of {GAIN_MODES}")
        self.strategies = [
            s if isinstance(s, Strategy) else Strategy.parse(s) for s in self.strategies
        ]

    def to_dict(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "sizes": self.sizes,
            "per_size": self.per_size,
            "num_users": self.num_users,
            "master_seed": self.master_seed,
            "generators": self.generators,
            "strategies": [s.key for s in self.strategies],
            "k": self.k,
            "gain": self.gain,
            "ruleset_path": self.ruleset_path,
            "corpus_dir": self.corpus_dir,
            "endpoint": self.endpoint.to_dict() if self.endpoint else None,
            "replay_only": self.replay_only,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        endpoint = data.get("endpoint")
        if endpoint is not None:
            data["endpoint"] = EndpointConfig.from_dict(endpoint)
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class RunArtifact:
    """Outcome of one run: streams on disk plus their loaded forms."""

    run_dir: Path
    manifest: dict
    records: list[EvalRecord]
    verdicts: list[dict]
    failures: list[dict]
    labels: dict[str, GroupStructureLabel]
    reports: dict[str, Path]


def parse_generator(spec: str) -> tuple[str, Strategy | None]:
    """('random'|'synthetic'|'model', strategy for synthetic specs)."""
    if spec == GENERATOR_RANDOM:
        return ("random", None)
    if spec.startswith(SYNTHETIC_PREFIX):
        return ("synthetic", Strategy.parse(spec[len(SYNTHETIC_PREFIX):]))
    return ("model", None)


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    rows = []
    for line in path.read_text().splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


def _append_jsonl(path: Path, rows: Iterable[dict]) -> None:
    rows = list(rows)
    if not rows:
        return
    with path.open("a") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _prepare_corpus(config: ExperimentConfig, run_dir: Path) -> tuple[ScenarioCorpus, Path]:
    if config.corpus_dir:
        corpus_dir = Path(config.corpus_dir)
        corpus = load_corpus(corpus_dir)
    else:
        corpus_dir = run_dir / "corpus"
        if (corpus_dir / "manifest.json").exists():
            corpus = load_corpus(corpus_dir)
        else:
            corpus = generate_corpus(
                config.sizes, config.per_size, config.master_seed, config.num_users
            )
            save_corpus(corpus, corpus_dir)
    min_items = min(s.num_items for s in corpus.scenarios)
    if config.k > min_items:
        raise ValueError(f"k={config.k} exceeds smallest corpus item count {min_items}")
    return corpus, corpus_dir


def _structure_labels(corpus: ScenarioCorpus, corpus_dir: Path) -> dict[str, GroupStructureLabel]:
    labels = load_labels(corpus_dir)
    if set(labels) == {s.scenario_id for s in corpus.scenarios}:
        return labels
    computed = classify_scenarios(corpus.scenarios)
    try:
        save_labels(corpus_dir, computed)
    except OSError:
        log.warning("could not persist structure labels into %s", corpus_dir)
    return {lab.scenario_id: lab for lab in computed}


def _endpoint_for(generator: str, endpoint: EndpointConfig | None) -> EndpointConfig:
    cfg = endpoint or EndpointConfig.from_env()
    if cfg.model != generator:
        cfg = EndpointConfig.from_dict({**cfg.to_dict(), "model": generator})
    return cfg


def _prefetch_model_responses(
    generator: str,
    scenarios: Sequence[GroupScenario],
    config: ExperimentConfig,
    store: ReplayStore,
) -> None:
    """Query missing responses with a bounded in-flight limit.

    Results are keyed by scenario_id and written to the replay store by this
    (single) thread, so completion order does not matter.
    """
    missing = [s for s in scenarios if store.lookup(generator, s.scenario_id) is None]
    if not missing:
        return
    cfg = _endpoint_for(generator, config.endpoint)
    workers = max(1, cfg.max_in_flight)
    from concurrent.futures import ThreadPoolExecutor

    def fetch(scenario: GroupScenario) -> tuple[str, str]:
        prompt = build_prompt(scenario, config.k)
        return scenario.scenario_id, query_endpoint(cfg, prompt.full_text)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fetch, missing))
    for sid, raw in results:
        store.record(generator, sid, raw)


def _obtain_raw_text(
    generator: str,
    scenario: GroupScenario,
    config: ExperimentConfig,
    store: ReplayStore,
    endpoint: EndpointConfig | None,
) -> str:
    kind, strategy = parse_generator(generator)
    if kind == "synthetic":
        return synthetic_generator(scenario, strategy, config.k)
    cached = store.lookup(generator, scenario.scenario_id)
    if cached is not None:
        return cached
    if config.replay_only:
        raise RunAbortedError(
            f"replay store has no response for ({generator}, {scenario.scenario_id})",
            missing=[(generator, scenario.scenario_id)],
        )
    cfg = _endpoint_for(generator, endpoint)
    prompt = build_prompt(scenario, config.k)
    raw = query_endpoint(cfg, prompt.full_text)
    store.record(generator, scenario.scenario_id, raw)
    return raw


def run_experiment(config: ExperimentConfig) -> RunArtifact:
    """Evaluate every (scenario, generator) pair against every strategy.

    All progress is appended to JSONL streams inside the run directory, and
    pairs already present are skipped, so an interrupted run resumes where
    it stopped. Offline generators (random, synthetic, replayed models) make
    the run a pure function of (config, master_seed, replay store).
    """
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()

    corpus, corpus_dir = _prepare_corpus(config, run_dir)
    labels = _structure_labels(corpus, corpus_dir)
    ruleset = RuleSet.load(config.ruleset_path) if config.ruleset_path else RuleSet.default()
    store = ReplayStore(run_dir / "replay")

    records_path = run_dir / RECORDS_FILE
    verdicts_path = run_dir / VERDICTS_FILE
    failures_path = run_dir / FAILURES_FILE

    existing_records = [EvalRecord.from_dict(r) for r in _read_jsonl(records_path)]
    existing_verdicts = _read_jsonl(verdicts_path)
    existing_failures = _read_jsonl(failures_path)
    record_keys = {(r.scenario_id, r.generator, r.strategy.key) for r in existing_records}
    verdict_keys = {(v["scenario_id"], v["generator"]) for v in existing_verdicts}
    failure_keys = {(f["scenario_id"], f["generator"]) for f in existing_failures}

    if config.replay_only:
        missing = [
            (gen, s.scenario_id)
            for gen in config.generators
            if parse_generator(gen)[0] == "model"
            for s in corpus.scenarios
            if (s.scenario_id, gen) not in verdict_keys
            and (s.scenario_id, gen) not in failure_keys
            and store.lookup(gen, s.scenario_id) is None
        ]
        if missing:
            raise RunAbortedError(
                f"replay-only run is missing {len(missing)} responses, "
                f"first: {missing[:5]}",
                missing=missing,
            )

    records = list(existing_records)
    verdicts = list(existing_verdicts)
    failures = list(existing_failures)

    for generator in config.generators:
        kind, _ = parse_generator(generator)
        if kind == "model" and not config.replay_only:
            todo = [
                s
                for s in corpus.scenarios
                if (s.scenario_id, generator) not in verdict_keys
                and (s.scenario_id, generator) not in failure_keys
            ]
            try:
                _prefetch_model_responses(generator, todo, config, store)
            except TransportError as exc:
                raise RunAbortedError(
                    f"endpoint unavailable for generator {generator}: {exc}",
                    missing=[(generator, s.scenario_id) for s in todo],
                ) from exc
        for scenario in corpus.scenarios:
            sid = scenario.scenario_id
            structure = labels[sid].label
            if kind == "random":
                pending = [s for s in config.strategies if (sid, generator, s.key) not in record_keys]
                if not pending:
                    continue
                seed = derive_seed(scenario.seed, stable_hash64(generator))
                ranked = random_recommendation(scenario, config.k, seed)
                new = [
                    EvalRecord(
                        scenario_id=sid,
                        generator=generator,
                        strategy=strategy,
                        ndcg=ndcg_at_k(ranked, strategy_scores(scenario, strategy), config.k, config.gain),
                        item_count=scenario.num_items,
                        structure=structure,
                    )
                    for strategy in pending
                ]
                _append_jsonl(records_path, [r.to_dict() for r in new])
                records.extend(new)
                record_keys.update((sid, generator, r.strategy.key) for r in new)
                continue

            if (sid, generator) in verdict_keys or (sid, generator) in failure_keys:
                continue
            try:
                raw = _obtain_raw_text(generator, scenario, config, store, config.endpoint)
            except TransportError as exc:
                raise RunAbortedError(
                    f"endpoint unavailable for ({generator}, {sid}): {exc}",
                    missing=[(generator, sid)],
                ) from exc
            response = parse_response(raw, scenario, config.k, source=generator)
            if not response.ok:
                row = {
                    "scenario_id": sid,
                    "generator": generator,
                    "item_count": scenario.num_items,
                    "reason": response.failure_reason,
                }
                _append_jsonl(failures_path, [row])
                failures.append(row)
                failure_keys.add((sid, generator))
                continue

            new = []
            for strategy in config.strategies:
                if (sid, generator, strategy.key) in record_keys:
                    continue
                new.append(
                    EvalRecord(
                        scenario_id=sid,
                        generator=generator,
                        strategy=strategy,
                        ndcg=ndcg_at_k(
                            response.recommendation,
                            strategy_scores(scenario, strategy),
                            config.k,
                            config.gain,
                        ),
                        item_count=scenario.num_items,
                        structure=structure,
                    )
                )
            verdict = classify_explanation(response.explanation, ruleset)
            verdict_row = {
                "scenario_id": sid,
                "generator": generator,
                "item_count": scenario.num_items,
                "structure": structure,
                "parse_status": response.parse_status,
                "labels": sorted(verdict.labels),
                "thresholds": [t.to_dict() for t in verdict.thresholds],
            }
            _append_jsonl(records_path, [r.to_dict() for r in new])
            _append_jsonl(verdicts_path, [verdict_row])
            records.extend(new)
            record_keys.update((sid, generator, r.strategy.key) for r in new)
            verdicts.append(verdict_row)
            verdict_keys.add((sid, generator))

    reports = render_reports(records, verdicts, labels, run_dir / REPORTS_DIR, failures=failures)

    manifest = {
        "config": config.to_dict(),
        "corpus": {"path": str(corpus_dir), "digest": corpus_digest(corpus), "size": len(corpus)},
        "started_at": started,
        "finished_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "counts": {
            "records": len(records),
            "verdicts": len(verdicts),
            "failures": len(failures),
        },
    }
    (run_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunArtifact(
        run_dir=run_dir,
        manifest=manifest,
        records=records,
        verdicts=verdicts,
        failures=failures,
        labels=labels,
        reports=reports,
    )


def _fmt(value: float, digits: int) -> str:
    return f"{value:.{digits}f}"


def _write_table(
    out_dir: Path,
    name: str,
    header: list[str],
    rows: list[list[str]],
) -> dict[str, Path]:
    csv_path = out_dir / f"{name}.csv"
    md_path = out_dir / f"{name}.md"
    csv_lines = [",".join(header)] + [",".join(row) for row in rows]
    csv_path.write_text("\n".join(csv_lines) + "\n")
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    def md_row(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    md_lines = [md_row(header), md_row(["-" * w for w in widths])]
    md_lines += [md_row(r) for r in rows]
    md_path.write_text("\n".join(md_lines) + "\n")
    return {f"{name}.csv": csv_path, f"{name}.md": md_path}


def render_reports(
    records: Sequence[EvalRecord],
    verdicts: Sequence[dict],
    labels: Mapping[str, GroupStructureLabel],
    out_dir: str | Path,
    failures: Sequence[dict] = (),
) -> dict[str, Path]:
    """Emit the four report shapes as CSV and markdown, byte-deterministic.

    (a) mean NDCG per generator x (strategy, item count); (b) explanation
    category percentages per generator x item count; (c) the same per
    generator x structure label; (d) uniform-minus-divergent NDCG deltas.
    """
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    generators = sorted({r.generator for r in records})
    strategies = sorted({r.strategy.key for r in records})
    sizes = sorted({r.item_count for r in records})
    means = summarize(records)

    header = ["generator"] + [f"{s}@{n}" for s in strategies for n in sizes]
    rows = []
    for gen in generators:
        row = [gen]
        for s in strategies:
            for n in sizes:
                val = means.get((gen, s, n))
                row.append(_fmt(val, 4) if val is not None else "")
        rows.append(row)
    paths.update(_write_table(out, "ndcg_means", header, rows))

    # failure rates per generator x item count (parse failures only)
    fail_counts: dict[tuple[str, int], int] = {}
    for f in failures:
        key = (f["generator"], int(f["item_count"]))
        fail_counts[key] = fail_counts.get(key, 0) + 1
    ok_counts: dict[tuple[str, int], int] = {}
    for v in verdicts:
        key = (v["generator"], int(v["item_count"]))
        ok_counts[key] = ok_counts.get(key, 0) + 1
    fr_gens = sorted({g for g, _ in list(fail_counts) + list(ok_counts)})
    fr_sizes = sorted({n for _, n in list(fail_counts) + list(ok_counts)})
    if fr_gens:
        header = ["generator"] + [f"failure_rate@{n}" for n in fr_sizes]
        rows = []
        for gen in fr_gens:
            row = [gen]
            for n in fr_sizes:
                failed = fail_counts.get((gen, n), 0)
                total = failed + ok_counts.get((gen, n), 0)
                row.append(_fmt(failed / total, 4) if total else "")
            rows.append(row)
        paths.update(_write_table(out, "failure_rates", header, rows))

    # explanation category percentages
    all_labels = sorted({lab for v in verdicts for lab in v["labels"]})
    verdict_gens = sorted({v["generator"] for v in verdicts})
    if verdicts and all_labels:
        header = ["generator"] + [f"{lab}@{n}" for lab in all_labels for n in fr_sizes]
        rows = []
        for gen in verdict_gens:
            row = [gen]
            for lab in all_labels:
                for n in fr_sizes:
                    pool = [v for v in verdicts if v["generator"] == gen and v["item_count"] == n]
                    if not pool:
                        row.append("")
                        continue
                    share = sum(1 for v in pool if lab in v["labels"]) / len(pool)
                    row.append(_fmt(100.0 * share, 1))
            rows.append(row)
        paths.update(_write_table(out, "categories_by_items", header, rows))

        header = ["generator", "structure"] + all_labels
        rows = []
        for gen in verdict_gens:
            for structure in (DIVERGENT, UNIFORM):
                pool = [
                    v for v in verdicts if v["generator"] == gen and v["structure"] == structure
                ]
                if not pool:
                    continue
                row = [gen, structure]
                for lab in all_labels:
                    share = sum(1 for v in pool if lab in v["labels"]) / len(pool)
                    row.append(_fmt(100.0 * share, 1))
                rows.append(row)
        paths.update(_write_table(out, "categories_by_structure", header, rows))

    delta = delta_ndcg(records, labels)
    header = ["generator", "strategy", "item_count", "delta_ndcg"]
    rows = [
        [gen, strat, str(n), _fmt(delta.deltas[(gen, strat, n)], 4)]
        for (gen, strat, n) in sorted(delta.deltas)
    ]
    paths.update(_write_table(out, "delta_ndcg", header, rows))
    return paths
