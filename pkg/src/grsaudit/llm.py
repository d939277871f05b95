"""Prompt construction, endpoint querying, response parsing, and oracles."""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .aggregation import DEFAULT_K, RankedList, Strategy, aggregate
from .errors import TransportError
from .scenario import GroupScenario, render_table

log = logging.getLogger(__name__)

SCENARIO_OPEN_TAG = "<group_scenario>"
SCENARIO_CLOSE_TAG = "</group_scenario>"

SYSTEM_TEXT = (
    "You are an expert in making and explaining group recommendations "
    "based on the knowledge base provided below. "
    "The information includes users (user_id) and information on items they like (item_x). "
    "The rating is a scale from 0 to 100. When referring to items, use item_value."
)

FORMAT_INSTRUCTIONS = (
    "Recommend the top {k} items for the group. "
    "Provide an explanation and example of your recommendation procedure, "
    "which someone with no knowledge of recommender systems could understand. "
    "Only return a JSON object containing the 'recommendation' (top {k} item list) "
    "and 'explanation' keys."
)

PARSE_OK = "ok"
PARSE_REPAIRED = "repaired"
PARSE_FAILED = "failed"

_ITEM_LABEL_RE = re.compile(r"^\s*item[\s_\-]*(\d+)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    scenario_block: str
    format_instructions: str
    full_text: str


def build_prompt(scenario: GroupScenario, k: int = DEFAULT_K) -> PromptBundle:
    """Deterministic prompt: goal and format text, tagged table, output rules."""
    scenario_block = f"{SCENARIO_OPEN_TAG}\n{render_table(scenario)}\n{SCENARIO_CLOSE_TAG}"
    format_instructions = FORMAT_INSTRUCTIONS.format(k=k)
    full_text = f"{SYSTEM_TEXT}\n\n{scenario_block}\n\n{format_instructions}"
    return PromptBundle(
        system_text=SYSTEM_TEXT,
        scenario_block=scenario_block,
        format_instructions=format_instructions,
        full_text=full_text,
    )


@dataclass
class EndpointConfig:
    """Chat-completion endpoint settings; fields override from environment."""

    base_url: str = "http://localhost:11434/v1"
    model: str = "llama3.1"
    temperature: float | None = None
    timeout: float = 120.0
    retry_budget: int = 2
    max_in_flight: int = 4

    ENV_PREFIX = "GRSAUDIT_ENDPOINT_"

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        cfg = cls(**overrides)
        env = os.environ
        if cls.ENV_PREFIX + "URL" in env:
            cfg.base_url = env[cls.ENV_PREFIX + "URL"]
        if cls.ENV_PREFIX + "MODEL" in env:
            cfg.model = env[cls.ENV_PREFIX + "MODEL"]
        if cls.ENV_PREFIX + "TEMPERATURE" in env:
            cfg.temperature = float(env[cls.ENV_PREFIX + "TEMPERATURE"])
        if cls.ENV_PREFIX + "TIMEOUT" in env:
            cfg.timeout = float(env[cls.ENV_PREFIX + "TIMEOUT"])
        if cls.ENV_PREFIX + "RETRIES" in env:
            cfg.retry_budget = int(env[cls.ENV_PREFIX + "RETRIES"])
        return cfg

    def to_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "model": self.model,
            "temperature": self.temperature,
            "timeout": self.timeout,
            "retry_budget": self.retry_budget,
            "max_in_flight": self.max_in_flight,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EndpointConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


def query_endpoint(
    config: EndpointConfig,
    prompt: str,
    attempt_budget: int | None = None,
    session: requests.Session | None = None,
    sleep=time.sleep,
) -> str:
    """POST the prompt to a chat-completions endpoint and return the text.

    Transport failures and retryable statuses back off exponentially until
    the attempt budget runs out, then raise TransportError with the last
    status seen.
    """
    attempts = attempt_budget if attempt_budget is not None else config.retry_budget + 1
    if attempts < 1:
        raise ValueError("attempt budget must be >= 1")
    url = config.base_url.rstrip("/") + "/chat/completions"
    payload: dict = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
    }
    if config.temperature is not None:
        payload["temperature"] = config.temperature
    http = session or requests.Session()
    last_status: int | None = None
    last_error: str = "no attempt made"
    for attempt in range(attempts):
        if attempt:
            sleep(0.5 * 2 ** (attempt - 1))
        started = time.monotonic()
        try:
            resp = http.post(url, json=payload, timeout=config.timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
            log.warning("request to %s failed (attempt %d/%d): %s", url, attempt + 1, attempts, exc)
            continue
        elapsed = time.monotonic() - started
        last_status = resp.status_code
        if resp.status_code in _RETRYABLE_STATUS:
            last_error = f"status {resp.status_code}"
            log.warning("endpoint returned %d (attempt %d/%d)", resp.status_code, attempt + 1, attempts)
            continue
        if resp.status_code != 200:
            raise TransportError(
                f"endpoint returned non-retryable status {resp.status_code}",
                last_status=resp.status_code,
                attempts=attempt + 1,
            )
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"endpoint response not in chat-completion shape: {exc}",
                last_status=resp.status_code,
                attempts=attempt + 1,
            ) from exc
        log.info("endpoint %s answered in %.2fs (%d chars)", config.model, elapsed, len(text))
        return text
    raise TransportError(
        f"exhausted {attempts} attempts against {url}: {last_error}",
        last_status=last_status,
        attempts=attempts,
    )


@dataclass
class GeneratorResponse:
    """Parsed generator output; recommendation is set for ok/repaired only."""

    raw_text: str
    recommendation: RankedList | None
    explanation: str
    parse_status: str
    failure_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.parse_status in (PARSE_OK, PARSE_REPAIRED)


def normalize_item_label(raw: object) -> str | None:
    """Map spelling variants (Item 3, item3, ITEM_3) onto item_<n>."""
    m = _ITEM_LABEL_RE.match(str(raw))
    if not m:
        return None
    return f"item_{int(m.group(1))}"


def _first_json_object(text: str) -> dict | None:
    """First balanced JSON object anywhere in the text, or None."""
    decoder = json.JSONDecoder()
    for start in range(len(text)):
        if text[start] != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text, start)
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_response(
    raw_text: str,
    scenario: GroupScenario,
    k: int = DEFAULT_K,
    source: str = "llm",
) -> GeneratorResponse:
    """Extract and validate a recommendation/explanation object.

    Never raises: every input maps to ok, repaired, or failed(reason).
    Longer-than-k lists are truncated (repaired); shorter lists, unknown or
    duplicate items, and missing keys fail.
    """

    def failed(reason: str) -> GeneratorResponse:
        return GeneratorResponse(
            raw_text=raw_text,
            recommendation=None,
            explanation="",
            parse_status=PARSE_FAILED,
            failure_reason=reason,
        )

    obj = _first_json_object(raw_text or "")
    if obj is None:
        return failed("no_object")
    if "recommendation" not in obj or "explanation" not in obj:
        return failed("missing_key")
    rec = obj["recommendation"]
    explanation = obj["explanation"]
    if not isinstance(rec, list):
        return failed("bad_recommendation")
    if not isinstance(explanation, str) or not explanation.strip():
        return failed("empty_explanation")

    status = PARSE_OK
    if len(rec) > k:
        rec = rec[:k]
        status = PARSE_REPAIRED
    if len(rec) < min(k, scenario.num_items):
        return failed("too_few_items")

    known = set(scenario.items)
    items: list[str] = []
    for entry in rec:
        label = normalize_item_label(entry)
        if label is None:
            return failed(f"invalid_item:{entry!r}")
        if label not in known:
            return failed(f"unknown_item:{label}")
        if label in items:
            return failed("duplicate_item")
        items.append(label)

    ranked = RankedList(entries=[(item, 0.0) for item in items], k=k, source=source)
    return GeneratorResponse(
        raw_text=raw_text,
        recommendation=ranked,
        explanation=explanation,
        parse_status=status,
    )


# Explanation templates truthfully describing each strategy; {item} is the
# top-ranked item so the text references items the way the prompt demands.
_EXPLANATION_TEMPLATES: dict[str, list[str]] = {
    "ADD": [
        (
            "We averaged the ratings for each item across all group members and "
            "picked the top {k} items with the highest average rating. For example, "
            "{item} received consistently strong ratings, so its average puts it first."
        ),
        (
            "We added up the ratings from all members for every item and recommended "
            "the {k} items with the largest sums. For example, {item} had the biggest total."
        ),
    ],
    "MPL": [
        (
            "For each item we looked at the single highest rating any group member gave "
            "it and recommended the top {k} items by that value, following the most "
            "pleasure principle. For example, at least one member rated {item} extremely high."
        ),
        (
            "We ranked items by the maximum rating any one member gave and took the "
            "best {k}. For example, somebody in the group loved {item}."
        ),
    ],
    "LMS": [
        (
            "For each item we took the lowest rating given by any group member and "
            "recommended the top {k} items whose lowest rating was best, following the "
            "least misery principle. For example, even the least happy member rated {item} well."
        ),
        (
            "We ranked items by their minimum rating, protecting the least happy member, "
            "and took the best {k}. For example, {item} had a strong minimum."
        ),
    ],
    "APP": [
        (
            "We counted how many group members gave each item a rating above {threshold} "
            "and recommended the top {k} items with the most approval votes. For example, "
            "{item} cleared the bar for the largest share of members."
        ),
        (
            "Each member casts a vote for every item they scored above {threshold}; the "
            "{k} items with the most votes win. For example, {item} collected the most votes."
        ),
    ],
}


def synthetic_generator(
    scenario: GroupScenario,
    strategy: Strategy,
    k: int = DEFAULT_K,
    template: int = 0,
) -> str:
    """Deterministic stand-in for a model: applies a known strategy and emits
    a well-formed response whose explanation truthfully names the procedure."""
    ranked = aggregate(scenario, strategy, k)
    texts = _EXPLANATION_TEMPLATES[strategy.name]
    threshold = strategy.threshold
    threshold_text = None
    if threshold is not None:
        threshold_text = f"{threshold:g}" if threshold != int(threshold) else str(int(threshold))
    explanation = texts[template % len(texts)].format(
        k=k, item=ranked.items[0], threshold=threshold_text
    )
    return json.dumps({"recommendation": ranked.items, "explanation": explanation})


class ReplayStore:
    """Raw response texts keyed by (model, scenario_id), one JSONL per model.

    Lets runs replay earlier endpoint traffic byte-for-byte, so experiments
    are reproducible offline. Live runs append every response they see.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._cache: dict[str, dict[str, str]] = {}

    def _slug(self, model: str) -> str:
        return re.sub(r"[^A-Za-z0-9._-]+", "_", model) or "model"

    def _path(self, model: str) -> Path:
        return self.directory / f"{self._slug(model)}.jsonl"

    def _load(self, model: str) -> dict[str, str]:
        if model not in self._cache:
            table: dict[str, str] = {}
            path = self._path(model)
            if path.exists():
                for line in path.read_text().splitlines():
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    table[row["scenario_id"]] = row["raw_text"]
            self._cache[model] = table
        return self._cache[model]

    def lookup(self, model: str, scenario_id: str) -> str | None:
        return self._load(model).get(scenario_id)

    def record(self, model: str, scenario_id: str, raw_text: str) -> None:
        table = self._load(model)
        if table.get(scenario_id) == raw_text:
            return
        table[scenario_id] = raw_text
        self.directory.mkdir(parents=True, exist_ok=True)
        row = {"scenario_id": scenario_id, "model": model, "raw_text": raw_text}
        with self._path(model).open("a") as fh:
            fh.write(json.dumps(row) + "\n")
