"""Rule-based multi-label categorization of recommendation explanations.

Token windows are compared to configured keyphrases by normalized
Levenshtein similarity; matches can be cancelled by nearby negation cues;
numeric rating thresholds are extracted from phrase templates.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import RulesetError, UndefinedKappaError

POPULARITY_UNDEFINED = "popularity_undefined"
POPULARITY_THRESHOLD = "popularity_threshold"

_TOKEN_RE = re.compile(r"[a-z0-9']+")
_VALUE_SLOT = "[value]"
_NUMBER_GROUP = r"(\d{1,3}(?:\.\d+)?)"


class Token(NamedTuple):
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Case-folded word tokens with character offsets."""
    return [Token(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text.lower())]


def levenshtein(a: str, b: str) -> int:
    """Edit distance, two-row dynamic program."""
    if len(a) > len(b):
        a, b = b, a
    current = list(range(len(a) + 1))
    for i, cb in enumerate(b, 1):
        previous, current = current, [i] + [0] * len(a)
        for j, ca in enumerate(a, 1):
            cost = 0 if ca == cb else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
    return current[len(a)]


@lru_cache(maxsize=1 << 18)
def similarity(a: str, b: str) -> float:
    """Normalized similarity: 1 - distance / max length. 1.0 iff equal."""
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _normalize_phrase(phrase: str) -> str:
    return " ".join(t.text for t in tokenize(phrase))


@dataclass
class RuleSet:
    """Categories, negation cues, and threshold templates for classification.

    The shipped default (data/default_ruleset.json) is a reconstruction of
    common aggregation vocabulary; treat it as a starting point and version
    your own copy for real audits.
    """

    categories: dict[str, list[str]]
    negation_cues: list[str]
    negation_window: int = 3
    similarity_threshold: float = 0.85
    threshold_phrases: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.categories:
            raise RulesetError("ruleset needs at least one category")
        for label, phrases in self.categories.items():
            if not phrases:
                raise RulesetError(f"category {label!r} has no keyphrases")
            if any(not _normalize_phrase(p) for p in phrases):
                raise RulesetError(f"category {label!r} has an empty keyphrase")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise RulesetError(
                f"similarity_threshold must be in (0, 1], got {self.similarity_threshold}"
            )
        if self.negation_window < 0:
            raise RulesetError("negation_window must be >= 0")
        for tpl in self.threshold_phrases:
            if _VALUE_SLOT not in tpl:
                raise RulesetError(f"threshold phrase {tpl!r} lacks a {_VALUE_SLOT} slot")
        # normalized (label, phrase, phrase_norm) triples, longest window first
        self._phrases = [
            (label, phrase, _normalize_phrase(phrase))
            for label, phrases in self.categories.items()
            for phrase in phrases
        ]
        self._max_window = max(len(norm.split()) for _, _, norm in self._phrases)
        self._cue_set = {c.lower() for c in self.negation_cues}

    @property
    def all_labels(self) -> list[str]:
        labels = list(self.categories)
        if POPULARITY_THRESHOLD not in labels:
            labels.append(POPULARITY_THRESHOLD)
        return labels

    def to_dict(self) -> dict:
        return {
            "categories": self.categories,
            "negation_cues": self.negation_cues,
            "negation_window": self.negation_window,
            "similarity_threshold": self.similarity_threshold,
            "threshold_phrases": self.threshold_phrases,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RuleSet":
        try:
            return cls(
                categories={k: list(v) for k, v in data["categories"].items()},
                negation_cues=list(data.get("negation_cues", [])),
                negation_window=int(data.get("negation_window", 3)),
                similarity_threshold=float(data.get("similarity_threshold", 0.85)),
                threshold_phrases=list(data.get("threshold_phrases", [])),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise RulesetError(f"malformed ruleset: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "RuleSet":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise RulesetError(f"ruleset {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def default(cls) -> "RuleSet":
        data = resources.files("grsaudit.data").joinpath("default_ruleset.json").read_text()
        return cls.from_dict(json.loads(data))


@dataclass
class KeyphraseMatch:
    label: str
    phrase: str
    text: str
    token_start: int
    token_end: int
    similarity: float
    negated: bool

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "phrase": self.phrase,
            "text": self.text,
            "token_start": self.token_start,
            "token_end": self.token_end,
            "similarity": round(self.similarity, 6),
            "negated": self.negated,
        }


@dataclass
class ThresholdMention:
    value: float
    start: int
    end: int
    text: str

    def to_dict(self) -> dict:
        return {"value": self.value, "start": self.start, "end": self.end, "text": self.text}


@dataclass
class ExplanationVerdict:
    labels: set[str]
    matches: list[KeyphraseMatch]
    thresholds: list[ThresholdMention]

    def to_dict(self) -> dict:
        return {
            "labels": sorted(self.labels),
            "matches": [m.to_dict() for m in self.matches],
            "thresholds": [t.to_dict() for t in self.thresholds],
        }


def detect_negation(
    tokens: Sequence[str],
    match_span: tuple[int, int],
    cues: Iterable[str],
    window: int,
) -> bool:
    """True iff a cue token occurs within `window` tokens before the span."""
    start = match_span[0]
    if not 0 <= start <= len(tokens):
        raise ValueError(f"span start {start} outside token bounds")
    cue_set = {c.lower() for c in cues}
    lo = max(0, start - window)
    return any(tokens[i].lower() in cue_set for i in range(lo, start))


def _template_pattern(tpl: str) -> str:
    """Compile a '[value]'-slotted phrase template into a regex pattern."""
    pieces: list[str] = []
    parts = tpl.split(_VALUE_SLOT)
    for i, raw in enumerate(parts):
        literal = raw.strip()
        if i > 0:
            if pieces:
                pieces.append(r"\s+")
            pieces.append(_NUMBER_GROUP)
            if literal:
                pieces.append(r"\s+")
        if literal:
            pieces.append(r"\s+".join(re.escape(w) for w in literal.split()))
    # boundaries: no word chars on either side, and never split a decimal
    return r"(?<!\w)(?<!\d\.)" + "".join(pieces) + r"(?!\w)(?!\.\d)"


def extract_thresholds(text: str, ruleset: RuleSet) -> list[ThresholdMention]:
    """Capture numeric rating thresholds next to configured phrase templates.

    Templates are matched case-insensitively with flexible whitespace; a
    number captured by several templates counts once (the most specific,
    i.e. longest, template wins). Values outside the 0-100 rating scale are
    ignored.
    """
    mentions: list[ThresholdMention] = []
    seen_value_spans: set[tuple[int, int]] = set()
    templates = sorted(ruleset.threshold_phrases, key=len, reverse=True)
    for tpl in templates:
        for m in re.finditer(_template_pattern(tpl), text, flags=re.IGNORECASE):
            value_span = m.span(1)
            if value_span in seen_value_spans:
                continue
            value = float(m.group(1))
            if not 0 <= value <= 100:
                continue
            seen_value_spans.add(value_span)
            value = int(value) if value == int(value) else value
            mentions.append(
                ThresholdMention(value=value, start=m.start(), end=m.end(), text=m.group(0))
            )
    mentions.sort(key=lambda t: t.start)
    return mentions


def classify_explanation(text: str, ruleset: RuleSet) -> ExplanationVerdict:
    """Multi-label verdict for one explanation text.

    A label applies when at least one keyphrase window clears the
    similarity threshold and is not negated. A captured numeric threshold
    turns undefined-popularity claims into popularity_threshold.
    """
    tokens = tokenize(text)
    if not tokens:
        return ExplanationVerdict(labels=set(), matches=[], thresholds=[])
    token_texts = [t.text for t in tokens]
    threshold = ruleset.similarity_threshold

    best: dict[tuple[str, int], KeyphraseMatch] = {}
    for width in range(1, min(ruleset._max_window, len(tokens)) + 1):
        for start in range(0, len(tokens) - width + 1):
            window_text = " ".join(token_texts[start : start + width])
            for label, phrase, norm in ruleset._phrases:
                # length gate: strings differing by more than the allowed
                # distance can never clear the threshold
                longest = max(len(window_text), len(norm))
                if abs(len(window_text) - len(norm)) > (1.0 - threshold) * longest:
                    continue
                score = similarity(window_text, norm)
                if score < threshold:
                    continue
                key = (label, start)
                prev = best.get(key)
                if prev is None or (score, width) > (prev.similarity, prev.token_end - prev.token_start):
                    best[key] = KeyphraseMatch(
                        label=label,
                        phrase=phrase,
                        text=window_text,
                        token_start=start,
                        token_end=start + width,
                        similarity=score,
                        negated=False,
                    )

    matches = []
    for key in sorted(best, key=lambda k: (k[1], k[0])):
        m = best[key]
        m.negated = detect_negation(
            token_texts,
            (m.token_start, m.token_end),
            ruleset._cue_set,
            ruleset.negation_window,
        )
        matches.append(m)

    labels = {m.label for m in matches if not m.negated}
    thresholds = extract_thresholds(text, ruleset)
    if thresholds:
        labels.discard(POPULARITY_UNDEFINED)
        labels.add(POPULARITY_THRESHOLD)
        for t in thresholds:
            matches.append(
                KeyphraseMatch(
                    label=POPULARITY_THRESHOLD,
                    phrase=_VALUE_SLOT,
                    text=t.text,
                    token_start=-1,
                    token_end=-1,
                    similarity=1.0,
                    negated=False,
                )
            )
    return ExplanationVerdict(labels=labels, matches=matches, thresholds=thresholds)


def cohens_kappa(
    labels_a: Sequence[Iterable[str]],
    labels_b: Sequence[Iterable[str]],
    label: str,
) -> float:
    """Chance-corrected agreement on the presence of one label."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists must have equal length")
    if not labels_a:
        raise ValueError("label lists are empty")
    n = len(labels_a)
    a = [label in s for s in labels_a]
    b = [label in s for s in labels_b]
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    pa, pb = sum(a) / n, sum(b) / n
    expected = pa * pb + (1 - pa) * (1 - pb)
    if expected == 1.0:
        raise UndefinedKappaError(f"marginals for {label!r} are degenerate (p_e = 1)")
    return (observed - expected) / (1 - expected)


def load_fixture_corpus(path: str | Path | None = None) -> list[tuple[str, set[str]]]:
    """Load (text, gold labels) pairs from a JSON-lines fixture file.

    With no path, the corpus shipped with the package is used.
    """
    if path is None:
        raw = resources.files("grsaudit.data").joinpath("explanation_fixtures.jsonl").read_text()
    else:
        raw = Path(path).read_text()
    fixtures = []
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        row = json.loads(line)
        fixtures.append((row["text"], set(row["gold_labels"])))
    return fixtures


def evaluate_ruleset(
    ruleset: RuleSet,
    fixtures: Sequence[tuple[str, set[str]]],
) -> dict[str, float]:
    """Per-label kappa between classifier verdicts and gold labels.

    Labels absent from both sides everywhere are skipped (kappa undefined).
    """
    predicted = [classify_explanation(text, ruleset).labels for text, _ in fixtures]
    gold = [labels for _, labels in fixtures]
    result: dict[str, float] = {}
    for label in ruleset.all_labels:
        try:
            result[label] = cohens_kappa(predicted, gold, label)
        except UndefinedKappaError:
            continue
    return result
