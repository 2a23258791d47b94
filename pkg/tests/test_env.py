import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmab.env import (
    InvalidInstanceError,
    MeanRewardTable,
    RewardModel,
    SpectrumEnv,
    channel_counts,
)


class TestMeanRewardTable:
    def test_desk_dimensions(self, desk_table):
        assert desk_table.num_players == 2
        assert desk_table.num_channels == 2
        assert desk_table.max_occupancy == 2

    def test_true_mean_lookup(self, desk_table):
        assert desk_table.true_mean(0, 0, 1) == 0.9
        assert desk_table.true_mean(1, 1, 2) == 0.15

    def test_true_mean_beyond_capacity_is_zero(self, desk_table):
        assert desk_table.true_mean(0, 0, 3) == 0.0
        assert desk_table.true_mean(1, 1, 7) == 0.0

    def test_occupancy_must_be_positive(self, desk_table):
        with pytest.raises(ValueError):
            desk_table.true_mean(0, 0, 0)

    def test_too_many_players_rejected(self):
        # 5 players cannot fit on 2 channels holding 2 each
        means = np.full((5, 2, 2), 0.5)
        means[:, :, 1] = 0.2
        with pytest.raises(InvalidInstanceError, match="capacity"):
            MeanRewardTable(means)

    def test_nonzero_mean_of_one_rejected(self):
        with pytest.raises(InvalidInstanceError):
            MeanRewardTable([[[1.0, 0.3]]])

    def test_negative_mean_rejected(self):
        with pytest.raises(InvalidInstanceError):
            MeanRewardTable([[[0.5, -0.1]]])

    def test_non_decreasing_means_rejected(self):
        with pytest.raises(InvalidInstanceError, match="decrease"):
            MeanRewardTable([[[0.3, 0.5]]])

    def test_zero_before_nonzero_rejected(self):
        with pytest.raises(InvalidInstanceError):
            MeanRewardTable([[[0.0, 0.5]]])

    def test_trailing_zeros_allowed(self):
        table = MeanRewardTable([[[0.5, 0.0], [0.4, 0.2]]])
        assert table.true_mean(0, 0, 2) == 0.0

    def test_monotone_until_zero(self, desk_table):
        for j in range(2):
            for m in range(2):
                previous = desk_table.true_mean(j, m, 1)
                for k in range(2, 5):
                    current = desk_table.true_mean(j, m, k)
                    if previous != 0.0:
                        assert current < previous
                    else:
                        assert current == 0.0
                    previous = current


class TestChannelCounts:
    def test_one_player_per_channel(self):
        assert channel_counts((0, 1), 2).tolist() == [1, 1]

    def test_all_collide(self):
        assert channel_counts((1, 1, 1), 2).tolist() == [0, 3]

    def test_desk_both_on_first(self):
        assert channel_counts((0, 0), 2).tolist() == [2, 0]

    def test_counts_sum_to_players(self):
        profile = (2, 0, 2, 1, 0)
        assert channel_counts(profile, 3).sum() == 5

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
    def test_permutation_equivariant(self, profile):
        base = channel_counts(profile, 4)
        permuted = channel_counts(profile[::-1], 4)
        assert np.array_equal(base, permuted)


class TestSampling:
    def test_deterministic_returns_means(self, desk_env_exact, rng):
        rewards = desk_env_exact.sample_rewards((0, 1), rng)
        assert rewards.tolist() == [0.9, 0.6]

    def test_overloaded_channel_pays_zero(self, rng):
        means = [[[0.5], [0.3]], [[0.4], [0.2]]]
        env = SpectrumEnv(MeanRewardTable(means), RewardModel(sigma=0.05))
        rewards = env.sample_rewards((1, 1), rng)
        assert rewards.tolist() == [0.0, 0.0]

    def test_rewards_within_unit_interval(self, desk_env, rng):
        for profile in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            for _ in range(200):
                rewards = desk_env.sample_rewards(profile, rng)
                assert np.all(rewards >= 0.0) and np.all(rewards <= 1.0)

    def test_seed_reproducibility(self, desk_env):
        a = [desk_env.sample_rewards((0, 1), np.random.default_rng(7)) for _ in range(3)]
        b = [desk_env.sample_rewards((0, 1), np.random.default_rng(7)) for _ in range(3)]
        assert np.array_equal(np.asarray(a), np.asarray(b))

    def test_gaussian_concentration(self, desk_env):
        # mean 0.9, sigma 0.05: nearly all draws within 4 sigma
        rng = np.random.default_rng(0)
        draws = desk_env.sample_occupancy_rewards(0, 0, 1, 100_000, rng)
        assert np.all(draws >= 0.0) and np.all(draws <= 1.0)
        inside = np.mean((draws >= 0.7) & (draws <= 1.0))
        assert inside >= 0.999

    def test_empirical_mean_converges(self, desk_env):
        rng = np.random.default_rng(1)
        n = 100_000
        for (player, channel, occ), true in [
            ((0, 0, 1), 0.9),
            ((1, 1, 2), 0.15),
            ((0, 1, 1), 0.5),
        ]:
            draws = desk_env.sample_occupancy_rewards(player, channel, occ, n, rng)
            # clipping bias at 0.9 (two sigma from 1.0) stays well under the band
            assert abs(draws.mean() - true) <= 5 * 0.05 / np.sqrt(n) + 5e-4

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_all_rewards_in_unit_interval_property(self, seed):
        means = [[[0.9, 0.3], [0.5, 0.2]], [[0.8, 0.25], [0.6, 0.15]]]
        env = SpectrumEnv(MeanRewardTable(means), RewardModel(sigma=0.3))
        rng = np.random.default_rng(seed)
        profile = tuple(rng.integers(0, 2, size=2))
        rewards = env.sample_rewards(profile, rng)
        assert np.all(rewards >= 0.0) and np.all(rewards <= 1.0)


class TestRewardModel:
    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidInstanceError):
            RewardModel(sigma=0.05, kind="poisson")

    def test_negative_sigma_rejected(self):
        with pytest.raises(InvalidInstanceError):
            RewardModel(sigma=-0.1)
