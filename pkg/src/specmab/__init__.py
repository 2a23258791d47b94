"""Multi-player bandit simulator for uncoordinated spectrum access.

Heterogeneous per-player channel rewards, non-zero collision payoffs, no
communication between players. Ships the learning protocol itself plus the
desk-scale verification stack: a brute-force matching oracle and an exact
Markov-chain analyzer of the trial-and-error matching dynamics.
"""

from .env import MeanRewardTable, RewardModel, SpectrumEnv, channel_counts
from .oracle import MatchingOracle, MatchingSolution, SeparabilityReport
from .estimator import EstimateTable, SampleStore, cluster, rebuild_estimates
from .dynamics import (
    EpochPlan,
    Player,
    PlayerState,
    ScheduleParams,
    derive_schedule,
    run_horizon,
)
from .trace import RunTrace

__all__ = [
    "MeanRewardTable",
    "RewardModel",
    "SpectrumEnv",
    "channel_counts",
    "MatchingOracle",
    "MatchingSolution",
    "SeparabilityReport",
    "EstimateTable",
    "SampleStore",
    "cluster",
    "rebuild_estimates",
    "EpochPlan",
    "Player",
    "PlayerState",
    "ScheduleParams",
    "derive_schedule",
    "run_horizon",
    "RunTrace",
]
