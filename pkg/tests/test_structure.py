import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grsaudit import (
    DIVERGENT,
    INTERMEDIATE,
    UNIFORM,
    DegeneratePopulationError,
    GroupScenario,
    classify_corpus,
    classify_scenarios,
    generate_corpus,
    generate_scenario,
    pairwise_distances,
    save_corpus,
)
from grsaudit.structure import load_labels, save_labels


def two_user_scenario(u1, u2):
    n = len(u1)
    return GroupScenario(
        "d",
        ["User_1", "User_2"],
        [f"item_{i}" for i in range(1, n + 1)],
        np.array([u1, u2]),
    )


def test_maximal_disagreement():
    report = pairwise_distances(two_user_scenario([0, 0], [100, 100]))
    assert report.pairwise[0, 1] == pytest.approx(100 * math.sqrt(2))
    assert report.normalized_distance == pytest.approx(1.0)


def test_identical_users():
    report = pairwise_distances(two_user_scenario([42, 7], [42, 7]))
    assert report.normalized_distance == 0.0


def test_hand_euclidean():
    report = pairwise_distances(two_user_scenario([0, 0], [100, 0]))
    assert report.pairwise[0, 1] == pytest.approx(100.0)
    assert report.normalized_distance == pytest.approx(100 / (100 * math.sqrt(2)))
    assert report.normalized_distance == pytest.approx(0.7071, abs=1e-4)


def test_matrix_shape_and_symmetry():
    s = generate_scenario(4, 25, seed=8)
    report = pairwise_distances(s)
    assert report.pairwise.shape == (4, 4)
    assert np.allclose(report.pairwise, report.pairwise.T)
    assert np.all(np.diag(report.pairwise) == 0)


def test_classify_rejects_degenerate_population():
    with pytest.raises(DegeneratePopulationError):
        classify_corpus([("a", 0.4), ("b", 0.4), ("c", 0.4)])
    with pytest.raises(DegeneratePopulationError):
        classify_corpus([("a", 0.4)])


def test_classify_normal_population_tails():
    # mu +/- sigma cuts of a normal leave about 15.9% in each tail
    rng = np.random.default_rng(17)
    values = rng.normal(0.4, 0.05, size=1000)
    labels = classify_corpus([(f"g{i}", float(v)) for i, v in enumerate(values)])
    counts = {UNIFORM: 0, DIVERGENT: 0, INTERMEDIATE: 0}
    for lab in labels:
        counts[lab.label] += 1
    assert abs(counts[UNIFORM] / 1000 - 0.159) <= 0.03
    assert abs(counts[DIVERGENT] / 1000 - 0.159) <= 0.03


def test_labels_consistent_with_thresholds():
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 1, size=200)
    labels = classify_corpus([(f"g{i}", float(v)) for i, v in enumerate(values)])
    low, high = labels[0].thresholds
    for lab in labels:
        if lab.normalized_distance < low:
            assert lab.label == UNIFORM
        elif lab.normalized_distance > high:
            assert lab.label == DIVERGENT
        else:
            assert lab.label == INTERMEDIATE


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=5, max_size=40),
    st.floats(min_value=0.05, max_value=20.0),
    st.floats(min_value=-5.0, max_value=5.0),
)
def test_affine_label_invariance(values, a, b):
    values = [round(v, 6) for v in values]
    if max(values) == min(values):
        return
    original = classify_corpus([(f"g{i}", v) for i, v in enumerate(values)])
    mapped = classify_corpus([(f"g{i}", a * v + b) for i, v in enumerate(values)])
    assert [lab.label for lab in original] == [lab.label for lab in mapped]


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=2, max_value=5),
    st.integers(min_value=2, max_value=20),
    st.data(),
)
def test_user_permutation_symmetry(seed, users, items, data):
    s = generate_scenario(users, items, seed)
    perm = data.draw(st.permutations(range(users)))
    permuted = GroupScenario(
        s.scenario_id + "-p",
        s.users,
        s.items,
        s.ratings[list(perm), :],
    )
    a = pairwise_distances(s)
    b = pairwise_distances(permuted)
    assert b.normalized_distance == pytest.approx(a.normalized_distance)
    p = list(perm)
    assert np.allclose(b.pairwise, a.pairwise[np.ix_(p, p)])


def test_scale_comparability_across_item_counts():
    # same expected normalized distance whatever the item count
    rng_means = {}
    for stratum, size in enumerate((25, 50, 75)):
        corpus = generate_corpus([size], per_size=300, master_seed=500 + stratum)
        values = [pairwise_distances(s).normalized_distance for s in corpus.scenarios]
        rng_means[size] = float(np.mean(values))
    means = list(rng_means.values())
    assert max(means) - min(means) <= 0.02, rng_means


def test_save_load_labels_round_trip(tmp_path):
    corpus = generate_corpus([10], per_size=20, master_seed=2)
    save_corpus(corpus, tmp_path / "corpus")
    labels = classify_scenarios(corpus.scenarios)
    save_labels(tmp_path / "corpus", labels)
    loaded = load_labels(tmp_path / "corpus")
    assert set(loaded) == {s.scenario_id for s in corpus.scenarios}
    for lab in labels:
        restored = loaded[lab.scenario_id]
        assert restored.label == lab.label
        assert restored.normalized_distance == pytest.approx(lab.normalized_distance)
