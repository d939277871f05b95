"""Within-group user distances and uniform/divergent classification."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegeneratePopulationError
from .scenario import MANIFEST_NAME, GroupScenario

UNIFORM = "uniform"
DIVERGENT = "divergent"
INTERMEDIATE = "intermediate"


@dataclass
class DistanceReport:
    """Pairwise Euclidean user distances plus a size-normalized summary.

    normalized_distance is the mean off-diagonal distance divided by
    100 * sqrt(I), the largest distance two rating vectors of length I can
    have, making groups with different item counts comparable.
    """

    pairwise: np.ndarray
    normalized_distance: float


@dataclass
class GroupStructureLabel:
    scenario_id: str
    label: str
    normalized_distance: float
    thresholds: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "label": self.label,
            "normalized_distance": self.normalized_distance,
            "thresholds": list(self.thresholds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupStructureLabel":
        return cls(
            scenario_id=data["scenario_id"],
            label=data["label"],
            normalized_distance=float(data["normalized_distance"]),
            thresholds=tuple(data["thresholds"]),
        )


def pairwise_distances(scenario: GroupScenario) -> DistanceReport:
    """Symmetric U x U Euclidean distance matrix between user rating vectors."""
    m = scenario.ratings.astype(np.float64)
    diff = m[:, None, :] - m[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(scenario.num_users, k=1)
    mean_dist = float(d[iu].mean())
    max_dist = 100.0 * np.sqrt(scenario.num_items)
    return DistanceReport(pairwise=d, normalized_distance=mean_dist / max_dist)


def classify_corpus(
    distances: Sequence[tuple[str, float]],
) -> list[GroupStructureLabel]:
    """Label groups uniform/divergent/intermediate against pooled mu +/- sigma.

    Thresholds come from the whole population passed in, so strata with
    different item counts share one classification. Intermediate groups are
    kept and flagged; report layers exclude them.
    """
    if len(distances) < 2:
        raise DegeneratePopulationError("need at least 2 groups to classify")
    values = np.asarray([d for _, d in distances], dtype=np.float64)
    mu = float(values.mean())
    sigma = float(values.std())
    if sigma == 0.0:
        raise DegeneratePopulationError("distance population has zero variance")
    low, high = mu - sigma, mu + sigma
    labels = []
    for (scenario_id, d) in distances:
        if d < low:
            label = UNIFORM
        elif d > high:
            label = DIVERGENT
        else:
            label = INTERMEDIATE
        labels.append(
            GroupStructureLabel(
                scenario_id=scenario_id,
                label=label,
                normalized_distance=float(d),
                thresholds=(low, high),
            )
        )
    return labels


def classify_scenarios(scenarios: Sequence[GroupScenario]) -> list[GroupStructureLabel]:
    """Convenience wrapper: distances then pooled classification."""
    pairs = [(s.scenario_id, pairwise_distances(s).normalized_distance) for s in scenarios]
    return classify_corpus(pairs)


def save_labels(corpus_dir: str | Path, labels: Sequence[GroupStructureLabel]) -> Path:
    """Persist labels into the corpus manifest under `structure_labels`."""
    manifest_path = Path(corpus_dir) / MANIFEST_NAME
    manifest = json.loads(manifest_path.read_text())
    manifest["structure_labels"] = [
        {
            "scenario_id": lab.scenario_id,
            "normalized_distance": lab.normalized_distance,
            "label": lab.label,
        }
        for lab in labels
    ]
    manifest["structure_thresholds"] = list(labels[0].thresholds) if labels else None
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_labels(corpus_dir: str | Path) -> dict[str, GroupStructureLabel]:
    manifest = json.loads((Path(corpus_dir) / MANIFEST_NAME).read_text())
    rows = manifest.get("structure_labels")
    if rows is None:
        return {}
    thresholds = tuple(manifest.get("structure_thresholds") or (float("nan"), float("nan")))
    return {
        row["scenario_id"]: GroupStructureLabel(
            scenario_id=row["scenario_id"],
            label=row["label"],
            normalized_distance=float(row["normalized_distance"]),
            thresholds=thresholds,
        )
        for row in rows
    }
