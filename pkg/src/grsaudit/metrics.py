"""NDCG@k scoring against strategy references and report statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .aggregation import RankedList, Strategy, rank_items
from .errors import DegenerateReferenceError, UnknownItemError
from .structure import DIVERGENT, UNIFORM, GroupStructureLabel

log = logging.getLogger(__name__)

GAIN_LINEAR = "linear"
GAIN_BINARY = "binary"
GAIN_MODES = (GAIN_LINEAR, GAIN_BINARY)


def _discount(position: int) -> float:
    # position is 1-based
    return 1.0 / math.log2(position + 1)


def ndcg_at_k(
    candidate: RankedList,
    reference_scores: Mapping[str, float],
    k: int = 10,
    gain: str = GAIN_LINEAR,
) -> float:
    """Discounted cumulative gain of `candidate` against a reference strategy.

    gain="linear": an item's gain is its reference score and the ideal is
    the reference's own tie-broken top-k, so 1.0 is reached exactly by the
    reference ordering and the value is invariant to positive scaling of
    the scores.

    gain="binary": an item's gain is membership in the reference top-k and
    the ideal re-sorts the candidate's own gains, measuring how many
    reference picks the candidate found and how early. 1.0 means every
    candidate item is a reference pick; a candidate with no picks scores 0.

    reference_scores must cover all candidate items; its insertion order
    defines the tie-break (ascending item index when built from a scenario).
    """
    if gain not in GAIN_MODES:
        raise ValueError(f"gain must be one of {GAIN_MODES}, got {gain!r}")
    for item in candidate.items:
        if item not in reference_scores:
            raise UnknownItemError(f"candidate item {item!r} not covered by reference scores")
    if not reference_scores or max(reference_scores.values()) <= 0:
        raise DegenerateReferenceError("all reference scores are zero")

    ideal = rank_items(reference_scores, k)
    taken = candidate.items[:k]
    if gain == GAIN_LINEAR:
        dcg = sum(reference_scores[item] * _discount(p) for p, item in enumerate(taken, 1))
        idcg = sum(reference_scores[item] * _discount(p) for p, item in enumerate(ideal, 1))
        if idcg == 0:
            raise DegenerateReferenceError("ideal DCG is zero")
        return dcg / idcg
    relevant = set(ideal)
    gains = [1.0 if item in relevant else 0.0 for item in taken]
    hits = int(sum(gains))
    if hits == 0:
        return 0.0
    dcg = sum(g * _discount(p) for p, g in enumerate(gains, 1))
    idcg = sum(_discount(p) for p in range(1, hits + 1))
    return dcg / idcg


@dataclass
class EvalRecord:
    """One (scenario, generator, strategy) evaluation."""

    scenario_id: str
    generator: str
    strategy: Strategy
    ndcg: float
    item_count: int
    structure: str

    def __post_init__(self):
        if not 0.0 <= self.ndcg <= 1.0 + 1e-12:
            raise ValueError(f"ndcg out of [0, 1]: {self.ndcg}")
        self.ndcg = min(self.ndcg, 1.0)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.generator, self.strategy.key, self.item_count)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "generator": self.generator,
            "strategy": self.strategy.key,
            "ndcg": self.ndcg,
            "item_count": self.item_count,
            "structure": self.structure,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        return cls(
            scenario_id=data["scenario_id"],
            generator=data["generator"],
            strategy=Strategy.parse(data["strategy"]),
            ndcg=float(data["ndcg"]),
            item_count=int(data["item_count"]),
            structure=data["structure"],
        )


def summarize(records: Sequence[EvalRecord]) -> dict[tuple[str, str, int], float]:
    """Mean NDCG per (generator, strategy, item_count)."""
    if not records:
        raise ValueError("no records to summarize")
    sums: dict[tuple[str, str, int], list[float]] = {}
    for rec in records:
        sums.setdefault(rec.key, []).append(rec.ndcg)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


@dataclass
class DeltaReport:
    """Mean NDCG on uniform groups minus mean on divergent groups, per key.

    Positive means the generator tracked the strategy better on uniform
    groups; intermediates never contribute.
    """

    deltas: dict[tuple[str, str, int], float]
    skipped: list[tuple[str, str, int]]


def delta_ndcg(
    records: Sequence[EvalRecord],
    labels: Mapping[str, GroupStructureLabel | str],
) -> DeltaReport:
    """Per (generator, strategy, item_count): mean(uniform) - mean(divergent)."""

    def label_of(scenario_id: str) -> str | None:
        lab = labels.get(scenario_id)
        if lab is None:
            return None
        return lab.label if isinstance(lab, GroupStructureLabel) else lab

    pools: dict[tuple[str, str, int], dict[str, list[float]]] = {}
    for rec in records:
        lab = label_of(rec.scenario_id)
        if lab not in (UNIFORM, DIVERGENT):
            continue
        pools.setdefault(rec.key, {UNIFORM: [], DIVERGENT: []})[lab].append(rec.ndcg)

    deltas: dict[tuple[str, str, int], float] = {}
    skipped: list[tuple[str, str, int]] = []
    for key in sorted(pools):
        uni, div = pools[key][UNIFORM], pools[key][DIVERGENT]
        if not uni or not div:
            missing = UNIFORM if not uni else DIVERGENT
            log.warning("delta for %s omitted: no %s records", key, missing)
            skipped.append(key)
            continue
        deltas[key] = sum(uni) / len(uni) - sum(div) / len(div)
    return DeltaReport(deltas=deltas, skipped=skipped)
