import numpy as np
import pytest

from grsaudit import GroupScenario, RuleSet


@pytest.fixture
def s1() -> GroupScenario:
    """2 users x 3 items: User_1 = [10, 50, 90], User_2 = [30, 40, 20]."""
    return GroupScenario(
        scenario_id="s1",
        users=["User_1", "User_2"],
        items=["item_1", "item_2", "item_3"],
        ratings=np.array([[10, 50, 90], [30, 40, 20]]),
        seed=0,
    )


@pytest.fixture(scope="session")
def ruleset() -> RuleSet:
    return RuleSet.default()
