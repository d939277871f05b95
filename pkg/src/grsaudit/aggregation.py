"""Social choice aggregation strategies and ranked recommendation lists."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DimensionError
from .scenario import GroupScenario

STRATEGY_NAMES = ("ADD", "MPL", "LMS", "APP")
DEFAULT_APPROVAL_THRESHOLD = 50
DEFAULT_K = 10

_APP_RE = re.compile(r"^APP\((\d+(?:\.\d+)?)\)$")


@dataclass(frozen=True)
class Strategy:
    """An aggregation rule: ADD (sum), MPL (max), LMS (min), or APP(threshold).

    APP counts, per item, the users whose rating clears the threshold
    (inclusive). The other strategies carry no parameter.
    """

    name: str
    threshold: float | None = None

    def __post_init__(self):
        if self.name not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.name!r}; expected one of {STRATEGY_NAMES}")
        if self.name == "APP":
            t = DEFAULT_APPROVAL_THRESHOLD if self.threshold is None else self.threshold
            if not 0 <= t <= 100:
                raise ValueError(f"approval threshold must lie in [0, 100], got {t}")
            object.__setattr__(self, "threshold", float(t))
        elif self.threshold is not None:
            raise ValueError(f"{self.name} takes no threshold")

    @property
    def key(self) -> str:
        if self.name == "APP":
            t = self.threshold
            text = f"{t:g}" if t != int(t) else str(int(t))
            return f"APP({text})"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip()
        if text in ("ADD", "MPL", "LMS"):
            return cls(text)
        if text == "APP":
            return cls("APP")
        m = _APP_RE.match(text)
        if m:
            return cls("APP", float(m.group(1)))
        raise ValueError(f"cannot parse strategy {text!r}")

    def __str__(self) -> str:
        return self.key


ADD = Strategy("ADD")
MPL = Strategy("MPL")
LMS = Strategy("LMS")


def approval(threshold: float = DEFAULT_APPROVAL_THRESHOLD) -> Strategy:
    return Strategy("APP", threshold)


@dataclass
class RankedList:
    """An ordered top-k list of (item, score) pairs from one generator.

    Score 0 is the sentinel for generators that rank without scoring
    (random baseline, parsed model output); such lists keep the generator's
    own order.
    """

    entries: list[tuple[str, float]]
    k: int
    source: str

    def __post_init__(self):
        if self.k < 1:
            raise DimensionError("k must be >= 1")
        if len(self.entries) > self.k:
            raise ValueError(f"{len(self.entries)} entries exceed k={self.k}")
        items = [item for item, _ in self.entries]
        if len(set(items)) != len(items):
            raise ValueError("ranked list contains duplicate items")
        self.entries = [(item, float(score)) for item, score in self.entries]

    @property
    def items(self) -> list[str]:
        return [item for item, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [score for _, score in self.entries]

    def to_dict(self) -> dict:
        return {"source": self.source, "items": self.items, "scores": self.scores}

    @classmethod
    def from_dict(cls, data: dict) -> "RankedList":
        entries = list(zip(data["items"], data["scores"]))
        return cls(entries=entries, k=data.get("k", len(entries)), source=data["source"])


def strategy_scores(scenario: GroupScenario, strategy: Strategy) -> dict[str, float]:
    """Per-item strategy score, keyed by item label in scenario item order."""
    m = scenario.ratings
    if strategy.name == "ADD":
        col = m.sum(axis=0)
    elif strategy.name == "MPL":
        col = m.max(axis=0)
    elif strategy.name == "LMS":
        col = m.min(axis=0)
    else:  # APP
        col = (m >= strategy.threshold).sum(axis=0)
    return {item: float(v) for item, v in zip(scenario.items, col)}


def rank_items(scores: Mapping[str, float], k: int | None = None) -> list[str]:
    """Order items by descending score, ties broken by ascending position.

    The mapping's insertion order defines item positions, so scores built
    from a scenario tie-break by ascending item index.
    """
    items = list(scores)
    values = [scores[item] for item in items]
    order = sorted(range(len(items)), key=lambda i: (-values[i], i))
    if k is not None:
        order = order[:k]
    return [items[i] for i in order]


def aggregate(scenario: GroupScenario, strategy: Strategy, k: int = DEFAULT_K) -> RankedList:
    """Top-k group recommendation for one strategy (deterministic)."""
    if k < 1:
        raise DimensionError("k must be >= 1")
    scores = strategy_scores(scenario, strategy)
    top = rank_items(scores, min(k, scenario.num_items))
    return RankedList(
        entries=[(item, scores[item]) for item in top],
        k=k,
        source=strategy.key,
    )


def random_recommendation(scenario: GroupScenario, k: int = DEFAULT_K, seed: int = 0) -> RankedList:
    """Uniformly random ordered sample of k distinct items (seeded)."""
    if k > scenario.num_items:
        raise DimensionError(f"k={k} exceeds item count {scenario.num_items}")
    if k < 1:
        raise DimensionError("k must be >= 1")
    rng = np.random.default_rng(seed)
    picks = rng.choice(scenario.num_items, size=k, replace=False)
    return RankedList(
        entries=[(scenario.items[i], 0.0) for i in picks],
        k=k,
        source="random",
    )
