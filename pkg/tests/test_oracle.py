import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmab.env import MeanRewardTable, RewardModel, SpectrumEnv
from specmab.oracle import MatchingOracle, OracleTooLargeError


def brute_force_best(env):
    """Independent re-enumeration with plain loops; the oracle's oracle."""
    best_profile, best_value = None, -math.inf
    values = []
    for profile in itertools.product(range(env.num_channels), repeat=env.num_players):
        counts = [0] * env.num_channels
        for a in profile:
            counts[a] += 1
        value = 0.0
        for j, a in enumerate(profile):
            value += env.true_mean(j, a, counts[a])
        values.append(value)
        if value > best_value:
            best_profile, best_value = profile, value
    second = max((v for v in values if v < best_value), default=None)
    return best_profile, best_value, second


class TestSystemReward:
    def test_desk_optimal_profile(self, desk_oracle):
        assert desk_oracle.system_reward((0, 1)) == 0.9 + 0.6

    def test_desk_collision_profile(self, desk_oracle):
        assert desk_oracle.system_reward((0, 0)) == 0.3 + 0.25

    def test_single_player(self):
        env = SpectrumEnv(
            MeanRewardTable([[[0.9], [0.5]]]), RewardModel(kind="deterministic", sigma=0.0)
        )
        oracle = MatchingOracle(env)
        assert oracle.system_reward((0,)) == 0.9
        assert oracle.system_reward((1,)) == 0.5


class TestSolveMatching:
    def test_desk_solution(self, desk_oracle):
        solution = desk_oracle.solve()
        assert solution.optimal_profile == (0, 1)
        assert solution.j1 == 0.9 + 0.6
        assert solution.j2 == 0.8 + 0.5
        assert solution.delta == (solution.j1 - solution.j2) / 8
        assert solution.unique

    def test_matches_independent_enumeration(self, desk_env, desk_oracle):
        profile, j1, j2 = brute_force_best(desk_env)
        solution = desk_oracle.solve()
        assert solution.optimal_profile == profile
        assert solution.j1 == j1
        assert solution.j2 == j2

    def test_single_player_two_channels(self):
        env = SpectrumEnv(
            MeanRewardTable([[[0.9, 0.3], [0.5, 0.2]]]), RewardModel(sigma=0.05)
        )
        solution = MatchingOracle(env).solve()
        assert solution.optimal_profile == (0,)
        assert solution.j1 == 0.9
        assert solution.j2 == 0.5
        assert solution.delta == pytest.approx(0.4 / (2 * 2 * 2))

    def test_tie_detected_as_non_unique(self):
        # identical players: (0, 1) and (1, 0) tie exactly
        means = [[[0.9, 0.3], [0.5, 0.2]], [[0.9, 0.3], [0.5, 0.2]]]
        env = SpectrumEnv(MeanRewardTable(means), RewardModel(sigma=0.05))
        solution = MatchingOracle(env).solve()
        assert not solution.unique
        assert solution.optimal_profile == (0, 1)  # lexicographic winner

    def test_enumeration_cap(self, desk_env):
        oracle = MatchingOracle(desk_env, enumeration_cap=3)
        with pytest.raises(OracleTooLargeError, match="too large"):
            oracle.solve()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_random_instances_match_reenumeration(self, seed):
        rng = np.random.default_rng(seed)
        players = int(rng.integers(1, 4))
        channels = int(rng.integers(1, 4))
        levels = int(rng.integers(-(-players // channels), 4))
        # strictly decreasing rows drawn from a coarse grid, so ties are exact
        grid = np.arange(1, 19) * 0.05
        rows = np.empty((players, channels, levels))
        for j in range(players):
            for m in range(channels):
                rows[j, m] = np.sort(rng.choice(grid, size=levels, replace=False))[::-1]
        env = SpectrumEnv(MeanRewardTable(rows), RewardModel(sigma=0.05))
        oracle = MatchingOracle(env)
        profile, j1, j2 = brute_force_best(env)
        solution = oracle.solve()
        assert solution.j1 == j1
        assert solution.j2 == j2
        assert oracle.system_reward(solution.optimal_profile) == j1

    def test_scaling_leaves_argmax_unchanged(self, desk_env):
        base = MatchingOracle(desk_env).solve()
        for factor in (0.25, 0.5, 1.0):  # powers of two scale exactly
            scaled_env = SpectrumEnv(desk_env.table.scaled(factor), desk_env.noise)
            scaled = MatchingOracle(scaled_env).solve()
            assert scaled.optimal_profile == base.optimal_profile


class TestNuMin:
    def test_desk_value(self, desk_oracle):
        # gaps: 0.6, 0.3, 0.55, 0.45 across the four (player, channel) rows
        assert desk_oracle.nu_min() == 0.3

    def test_single_level_not_applicable(self):
        env = SpectrumEnv(MeanRewardTable([[[0.9], [0.5]]]), RewardModel(sigma=0.05))
        assert MatchingOracle(env).nu_min() is None

    def test_zero_level_contributes_no_pair(self):
        means = [[[0.5, 0.0], [0.9, 0.3]]]
        env = SpectrumEnv(MeanRewardTable(means), RewardModel(sigma=0.05))
        assert MatchingOracle(env).nu_min() == pytest.approx(0.6)


class TestSeparability:
    def test_desk_passes(self, desk_oracle):
        report = desk_oracle.check_separability(c_sep=0.1, eps2=0.0025)
        expected = 0.8 * math.e * math.sqrt(0.005)
        assert report.threshold == pytest.approx(expected)
        assert report.threshold < 0.3
        assert report.passed
        assert report.offending == []

    def test_large_constant_fails_everywhere(self, desk_oracle):
        report = desk_oracle.check_separability(c_sep=10.0, eps2=0.5)
        assert report.threshold > 1.0
        assert not report.passed
        assert len(report.offending) == 4  # one pair per (player, channel)

    def test_single_level_vacuous(self):
        env = SpectrumEnv(MeanRewardTable([[[0.9], [0.5]]]), RewardModel(sigma=0.05))
        report = MatchingOracle(env).check_separability(10.0, 0.5)
        assert report.passed
        assert report.nu_min is None


class TestRegret:
    def test_optimal_profile_zero(self, desk_oracle):
        assert desk_oracle.regret_increment((0, 1)) == 0.0

    def test_swapped_profile(self, desk_oracle):
        assert desk_oracle.regret_increment((1, 0)) == pytest.approx(0.2)

    def test_both_collide(self, desk_oracle):
        assert desk_oracle.regret_increment((1, 1)) == pytest.approx(1.15)

    def test_nonnegative_everywhere(self, desk_oracle):
        solution = desk_oracle.solve()
        for profile in itertools.product(range(2), repeat=2):
            inc = desk_oracle.regret_increment(profile)
            assert inc >= 0.0
            if profile != solution.optimal_profile:
                assert inc > 0.0

    def test_delta_at_most_half_gap(self, desk_oracle):
        solution = desk_oracle.solve()
        assert solution.delta <= (solution.j1 - solution.j2) / 2
