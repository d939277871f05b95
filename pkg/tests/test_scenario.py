import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grsaudit import (
    DimensionError,
    GroupScenario,
    TableParseError,
    generate_corpus,
    generate_scenario,
    load_corpus,
    parse_table,
    render_table,
    save_corpus,
)
from grsaudit.seeds import derive_seed, splitmix64


def test_generator_contract():
    s = generate_scenario(4, 25, seed=42)
    assert s.ratings.shape == (4, 25)
    assert s.ratings.min() >= 0 and s.ratings.max() <= 100
    assert s.users == [f"User_{i}" for i in range(1, 5)]
    assert s.items == [f"item_{i}" for i in range(1, 26)]


def test_generator_deterministic():
    a = generate_scenario(4, 25, seed=42)
    b = generate_scenario(4, 25, seed=42)
    assert a == b
    assert np.array_equal(a.ratings, b.ratings)


def test_generator_mean_within_monte_carlo_bound():
    # 300 uniform cells over [0, 100]: mean 50, sigma of the sample mean
    # about 1.67, so a 3-sigma window is [44, 56]
    s = generate_scenario(4, 75, seed=7)
    assert 44 <= s.ratings.mean() <= 56


def test_generator_rejects_bad_dimensions():
    with pytest.raises(DimensionError):
        generate_scenario(1, 10, seed=0)
    with pytest.raises(DimensionError):
        generate_scenario(4, 0, seed=0)


def test_scenario_validates_labels_and_range():
    with pytest.raises(DimensionError):
        GroupScenario("x", ["User_1", "User_2"], ["item_1"], np.array([[0], [101]]))
    with pytest.raises(DimensionError):
        GroupScenario("x", ["alice", "bob"], ["item_1"], np.array([[0], [1]]))
    with pytest.raises(DimensionError):
        GroupScenario("x", ["User_1", "User_2"], ["Item_1"], np.array([[0], [1]]))


def test_cell_distribution_deciles():
    # each decile of [0, 100] should get 10% +/- 2% of cells
    s = generate_scenario(10, 1000, seed=123)
    cells = s.ratings.ravel()
    for lo in range(0, 100, 10):
        share = ((cells >= lo) & (cells < lo + 10)).mean()
        # the last decile also holds the endpoint 100
        if lo == 90:
            share = (cells >= 90).mean()
        assert abs(share - 0.1) <= 0.02, (lo, share)


def test_corpus_counts_and_determinism():
    corpus = generate_corpus([25, 50, 75], per_size=5, master_seed=1)
    assert len(corpus) == 15
    assert {size: len(group) for size, group in corpus.size_strata.items()} == {25: 5, 50: 5, 75: 5}
    again = generate_corpus([25, 50, 75], per_size=5, master_seed=1)
    assert corpus.scenarios == again.scenarios
    assert [s.scenario_id for s in corpus.scenarios] == [s.scenario_id for s in again.scenarios]


def test_corpus_unit():
    corpus = generate_corpus([25], per_size=1, master_seed=9)
    assert len(corpus) == 1
    assert corpus.scenarios[0].num_items == 25


def test_corpus_rejects_bad_args():
    with pytest.raises(DimensionError):
        generate_corpus([], per_size=1, master_seed=0)
    with pytest.raises(DimensionError):
        generate_corpus([25, 25], per_size=1, master_seed=0)
    with pytest.raises(DimensionError):
        generate_corpus([25], per_size=0, master_seed=0)


def test_render_parse_round_trip_explicit():
    s = GroupScenario(
        "rt",
        ["User_1", "User_2"],
        ["item_1", "item_2"],
        np.array([[0, 100], [50, 50]]),
    )
    text = render_table(s)
    assert text.splitlines()[0] == "user_id\titem_1\titem_2"
    assert parse_table(text) == s


def test_parse_rejects_out_of_range_cell():
    text = "user_id\titem_1\titem_2\nUser_1\t10\t101\nUser_2\t5\t5"
    with pytest.raises(TableParseError, match=r"\(User_1, item_2\)"):
        parse_table(text)


def test_parse_rejects_missing_column():
    text = "user_id\titem_1\titem_2\nUser_1\t10\t20\nUser_2\t5"
    with pytest.raises(TableParseError, match="row 2"):
        parse_table(text)


def test_parse_rejects_non_integer_cell():
    text = "user_id\titem_1\nUser_1\tfoo\nUser_2\t5"
    with pytest.raises(TableParseError, match=r"\(User_1, item_1\)"):
        parse_table(text)


def test_parse_rejects_malformed_header():
    with pytest.raises(TableParseError, match="header"):
        parse_table("uid\titem_1\nUser_1\t1\nUser_2\t2")


scenario_strategy = st.builds(
    lambda seed, users, items: generate_scenario(users, items, seed),
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    users=st.integers(min_value=2, max_value=6),
    items=st.integers(min_value=1, max_value=30),
)


@settings(max_examples=60, deadline=None)
@given(scenario_strategy)
def test_round_trip_property(s):
    assert parse_table(render_table(s)) == s


def test_scenario_json_round_trip():
    s = generate_scenario(4, 25, seed=11)
    restored = GroupScenario.from_dict(json.loads(json.dumps(s.to_dict())))
    assert restored == s
    assert restored.scenario_id == s.scenario_id
    assert restored.seed == s.seed


def test_corpus_save_load_round_trip(tmp_path):
    corpus = generate_corpus([5, 8], per_size=3, master_seed=4)
    save_corpus(corpus, tmp_path / "corpus")
    loaded = load_corpus(tmp_path / "corpus")
    assert loaded.master_seed == corpus.master_seed
    assert loaded.scenarios == corpus.scenarios
    # layout: one file per scenario under <size>/
    assert (tmp_path / "corpus" / "5").is_dir()
    assert len(list((tmp_path / "corpus" / "5").glob("*.json"))) == 3


def test_derive_seed_is_stable_and_spread():
    assert derive_seed(1, 0, 0) == derive_seed(1, 0, 0)
    seeds = {derive_seed(1, a, b) for a in range(3) for b in range(200)}
    assert len(seeds) == 600
    assert splitmix64(0) != 0
