"""grsaudit: contextualize black-box group recommendations against
social choice aggregation strategies, classify group structure, and audit
the aggregation procedures that natural-language explanations claim."""

from .aggregation import (
    ADD,
    DEFAULT_APPROVAL_THRESHOLD,
    DEFAULT_K,
    LMS,
    MPL,
    RankedList,
    Strategy,
    aggregate,
    approval,
    random_recommendation,
    rank_items,
    strategy_scores,
)
from .errors import (
    DegeneratePopulationError,
    DegenerateReferenceError,
    DimensionError,
    GrsAuditError,
    RulesetError,
    RunAbortedError,
    TableParseError,
    TransportError,
    UndefinedKappaError,
    UnknownItemError,
)
from .explain import (
    POPULARITY_THRESHOLD,
    POPULARITY_UNDEFINED,
    ExplanationVerdict,
    KeyphraseMatch,
    RuleSet,
    ThresholdMention,
    classify_explanation,
    cohens_kappa,
    detect_negation,
    evaluate_ruleset,
    extract_thresholds,
    levenshtein,
    load_fixture_corpus,
    similarity,
)
from .harness import (
    ExperimentConfig,
    RunArtifact,
    parse_generator,
    render_reports,
    run_experiment,
)
from .llm import (
    EndpointConfig,
    GeneratorResponse,
    PromptBundle,
    ReplayStore,
    build_prompt,
    normalize_item_label,
    parse_response,
    query_endpoint,
    synthetic_generator,
)
from .metrics import (
    GAIN_BINARY,
    GAIN_LINEAR,
    DeltaReport,
    EvalRecord,
    delta_ndcg,
    ndcg_at_k,
    summarize,
)
from .scenario import (
    GroupScenario,
    ScenarioCorpus,
    generate_corpus,
    generate_scenario,
    load_corpus,
    parse_table,
    render_table,
    save_corpus,
)
from .seeds import derive_seed, splitmix64, stable_hash64
from .structure import (
    DIVERGENT,
    INTERMEDIATE,
    UNIFORM,
    DistanceReport,
    GroupStructureLabel,
    classify_corpus,
    classify_scenarios,
    pairwise_distances,
)

__version__ = "0.1.0"
