import numpy as np
import pytest

from specmab.env import MeanRewardTable, RewardModel, SpectrumEnv
from specmab.oracle import MatchingOracle

# canonical desk instance used throughout: two players, two channels,
# occupancy up to two, heterogeneous means
DESK_MEANS = [
    [[0.9, 0.3], [0.5, 0.2]],
    [[0.8, 0.25], [0.6, 0.15]],
]


@pytest.fixture
def desk_table():
    return MeanRewardTable(DESK_MEANS)


@pytest.fixture
def desk_env(desk_table):
    return SpectrumEnv(desk_table, RewardModel(sigma=0.05))


@pytest.fixture
def desk_env_exact(desk_table):
    return SpectrumEnv(desk_table, RewardModel(sigma=0.0, kind="deterministic"))


@pytest.fixture
def desk_oracle(desk_env):
    return MatchingOracle(desk_env)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
