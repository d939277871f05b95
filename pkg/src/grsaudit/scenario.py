"""Randomized anonymized group rating scenarios: generation, table text, persistence."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, TableParseError
from .seeds import derive_seed

RATING_MIN = 0
RATING_MAX = 100
DEFAULT_NUM_USERS = 4

MANIFEST_NAME = "manifest.json"


def user_labels(n: int) -> list[str]:
    return [f"User_{i}" for i in range(1, n + 1)]


def item_labels(n: int) -> list[str]:
    return [f"item_{i}" for i in range(1, n + 1)]


@dataclass(eq=False)
class GroupScenario:
    """A U x I rating matrix with anonymized user and item labels.

    Ratings are integers on the 0-100 scale as generated; real-valued
    matrices within the same bounds are accepted for derived data.
    Equality compares content (users, items, ratings); scenario_id and seed
    are provenance, deliberately excluded so that a table round-trip
    compares equal to its source scenario.
    """

    scenario_id: str
    users: list[str]
    items: list[str]
    ratings: np.ndarray
    seed: int = 0

    def __post_init__(self):
        arr = np.asarray(self.ratings)
        if arr.ndim != 2:
            raise DimensionError(f"ratings must be a 2-D matrix, got ndim={arr.ndim}")
        if np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.int64)
        elif np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
            if not np.isfinite(arr).all():
                raise DimensionError("ratings must be finite")
        else:
            raise DimensionError(f"ratings must be numeric, got dtype={arr.dtype}")
        if arr.shape != (len(self.users), len(self.items)):
            raise DimensionError(
                f"ratings shape {arr.shape} does not match "
                f"{len(self.users)} users x {len(self.items)} items"
            )
        if len(self.users) < 2:
            raise DimensionError("a group needs at least 2 users")
        if len(self.items) < 1:
            raise DimensionError("a scenario needs at least 1 item")
        if arr.size and (arr.min() < RATING_MIN or arr.max() > RATING_MAX):
            raise DimensionError(f"ratings must lie in [{RATING_MIN}, {RATING_MAX}]")
        if list(self.users) != user_labels(len(self.users)):
            raise DimensionError("user labels must be exactly User_1..User_U")
        if list(self.items) != item_labels(len(self.items)):
            raise DimensionError("item labels must be exactly item_1..item_I")
        self.ratings = arr
        self.users = list(self.users)
        self.items = list(self.items)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupScenario):
            return NotImplemented
        return (
            self.users == other.users
            and self.items == other.items
            and np.array_equal(self.ratings, other.ratings)
        )

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_items(self) -> int:
        return len(self.items)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "users": self.users,
            "items": self.items,
            "ratings": self.ratings.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupScenario":
        return cls(
            scenario_id=data["scenario_id"],
            users=list(data["users"]),
            items=list(data["items"]),
            ratings=np.asarray(data["ratings"]),
            seed=int(data.get("seed", 0)),
        )


def generate_scenario(
    num_users: int, num_items: int, seed: int, scenario_id: str | None = None
) -> GroupScenario:
    """Draw a scenario with i.i.d. uniform integer ratings over [0, 100].

    The same seed always yields the same matrix.
    """
    if num_users < 2:
        raise DimensionError("num_users must be >= 2")
    if num_items < 1:
        raise DimensionError("num_items must be >= 1")
    rng = np.random.default_rng(seed)
    ratings = rng.integers(RATING_MIN, RATING_MAX + 1, size=(num_users, num_items), dtype=np.int64)
    if scenario_id is None:
        scenario_id = f"s{num_users}x{num_items}-{seed & (2**64 - 1):016x}"
    return GroupScenario(
        scenario_id=scenario_id,
        users=user_labels(num_users),
        items=item_labels(num_items),
        ratings=ratings,
        seed=seed,
    )


@dataclass(eq=False)
class ScenarioCorpus:
    """A collection of scenarios stratified by item count."""

    scenarios: list[GroupScenario]
    master_seed: int

    def __post_init__(self):
        ids = [s.scenario_id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate scenario ids: {dupes}")

    @property
    def size_strata(self) -> dict[int, list[GroupScenario]]:
        strata: dict[int, list[GroupScenario]] = {}
        for s in self.scenarios:
            strata.setdefault(s.num_items, []).append(s)
        return strata

    def __len__(self) -> int:
        return len(self.scenarios)


def generate_corpus(
    sizes: Sequence[int],
    per_size: int,
    master_seed: int,
    num_users: int = DEFAULT_NUM_USERS,
) -> ScenarioCorpus:
    """Generate `per_size` scenarios for each item count in `sizes`.

    Child seeds are index-derived from the master seed, so any slice of the
    corpus can be regenerated independently.
    """
    if not sizes:
        raise DimensionError("sizes must be non-empty")
    if len(set(sizes)) != len(sizes):
        raise DimensionError("sizes must be distinct")
    if per_size < 1:
        raise DimensionError("per_size must be >= 1")
    scenarios = []
    for stratum, size in enumerate(sizes):
        for i in range(per_size):
            seed = derive_seed(master_seed, stratum, i)
            scenarios.append(
                generate_scenario(num_users, size, seed, scenario_id=f"g{size}-{i:04d}")
            )
    return ScenarioCorpus(scenarios=scenarios, master_seed=master_seed)


def render_table(scenario: GroupScenario) -> str:
    """Render a scenario as a tab-separated table with a `user_id` header."""
    if not np.issubdtype(scenario.ratings.dtype, np.integer):
        raise ValueError("only integer rating matrices have a table form")
    lines = ["\t".join(["user_id", *scenario.items])]
    for u, user in enumerate(scenario.users):
        cells = [str(int(v)) for v in scenario.ratings[u]]
        lines.append("\t".join([user, *cells]))
    return "\n".join(lines)


def parse_table(text: str, scenario_id: str | None = None, seed: int = 0) -> GroupScenario:
    """Parse table text produced by `render_table` back into a scenario.

    Errors name the offending row and column. The scenario_id defaults to a
    digest of the text; provenance fields do not take part in equality.
    """
    lines = [ln.rstrip("\r") for ln in text.strip("\n").split("\n")]
    if not lines or not lines[0]:
        raise TableParseError("empty table text")
    header = lines[0].split("\t")
    if header[0] != "user_id":
        raise TableParseError(f"malformed header: first column must be 'user_id', got {header[0]!r}")
    items = header[1:]
    if not items:
        raise TableParseError("malformed header: no item columns")
    expected_items = item_labels(len(items))
    if items != expected_items:
        for col, (got, want) in enumerate(zip(items, expected_items), start=1):
            if got != want:
                raise TableParseError(f"malformed header: column {col + 1} is {got!r}, expected {want!r}")
    num_items = len(items)
    rows = []
    body = lines[1:]
    if len(body) < 2:
        raise TableParseError("table needs at least 2 user rows")
    for r, line in enumerate(body, start=1):
        cells = line.split("\t")
        user = cells[0]
        if user != f"User_{r}":
            raise TableParseError(f"row {r}: user label is {user!r}, expected 'User_{r}'")
        values = cells[1:]
        if len(values) != num_items:
            raise TableParseError(
                f"row {r} ({user}): expected {num_items} ratings, found {len(values)}"
            )
        row = []
        for c, cell in enumerate(values):
            item = items[c]
            try:
                v = int(cell)
            except ValueError:
                raise TableParseError(f"non-integer rating at ({user}, {item}): {cell!r}") from None
            if v < RATING_MIN or v > RATING_MAX:
                raise TableParseError(f"rating out of range at ({user}, {item}): {v}")
            row.append(v)
        rows.append(row)
    if scenario_id is None:
        scenario_id = "parsed-" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]
    return GroupScenario(
        scenario_id=scenario_id,
        users=user_labels(len(rows)),
        items=expected_items,
        ratings=np.asarray(rows, dtype=np.int64),
        seed=seed,
    )


def save_corpus(corpus: ScenarioCorpus, directory: str | Path) -> Path:
    """Write one JSON file per scenario under <dir>/<size>/ plus a manifest."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in corpus.scenarios:
        subdir = root / str(s.num_items)
        subdir.mkdir(parents=True, exist_ok=True)
        path = subdir / f"{s.scenario_id}.json"
        path.write_text(json.dumps(s.to_dict(), indent=2, sort_keys=True) + "\n")
        entries.append(
            {
                "scenario_id": s.scenario_id,
                "num_items": s.num_items,
                "num_users": s.num_users,
                "seed": s.seed,
                "path": str(path.relative_to(root)),
            }
        )
    manifest = {"master_seed": corpus.master_seed, "scenarios": entries}
    manifest_path = root / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_corpus(directory: str | Path) -> ScenarioCorpus:
    root = Path(directory)
    manifest = json.loads((root / MANIFEST_NAME).read_text())
    scenarios = []
    for entry in manifest["scenarios"]:
        data = json.loads((root / entry["path"]).read_text())
        scenarios.append(GroupScenario.from_dict(data))
    return ScenarioCorpus(scenarios=scenarios, master_seed=int(manifest["master_seed"]))


def corpus_digest(corpus: ScenarioCorpus) -> str:
    """Stable digest of corpus identity (ids, seeds, shapes)."""
    h = hashlib.sha256()
    for s in corpus.scenarios:
        h.update(f"{s.scenario_id}:{s.seed}:{s.num_users}x{s.num_items}\n".encode())
    return h.hexdigest()
