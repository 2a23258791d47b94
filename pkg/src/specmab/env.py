"""Ground-truth reward model for the multi-channel access game.

Channels look different to different players, and a channel shared by k
players pays each of them less than it would pay fewer players. Above a
per-channel capacity the payout is exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOISE_KINDS = ("truncated-gaussian", "deterministic")


class InvalidInstanceError(ValueError):
    """Raised when a mean-reward table violates the model constraints."""


@dataclass(frozen=True)
class RewardModel:
    """Additive noise model; sampled rewards are always clipped to [0, 1]."""

    sigma: float = 0.05
    kind: str = "truncated-gaussian"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInstanceError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise InvalidInstanceError("sigma must be >= 0")


class MeanRewardTable:
    """Per-player, per-channel mean rewards as a function of occupancy.

    ``means[j, m, k-1]`` is the expected reward of player ``j`` on channel
    ``m`` when ``k`` players (including ``j``) occupy it. For every fixed
    (player, channel) the nonzero entries strictly decrease with occupancy
    and are zero from the first zero onward; occupancies beyond the stored
    range pay zero.
    """

    def __init__(self, means):
        means = np.asarray(means, dtype=float)
        if means.ndim != 3:
            raise InvalidInstanceError("means must have shape (players, channels, occupancy)")
        self.means = means
        self.num_players, self.num_channels, self.max_occupancy = means.shape
        self._validate()

    def _validate(self):
        k, m, n = self.num_players, self.num_channels, self.max_occupancy
        if min(k, m, n) < 1:
            raise InvalidInstanceError("players, channels and occupancy must be positive")
        if k > m * n:
            raise InvalidInstanceError(
                f"{k} players exceed system capacity {m}*{n}={m * n}"
            )
        if np.any(self.means < 0.0) or np.any(self.means >= 1.0):
            raise InvalidInstanceError("nonzero means must lie strictly inside (0, 1)")
        for j in range(k):
            for ch in range(m):
                row = self.means[j, ch]
                prefix = row[row != 0.0]
                # zeros may only trail the nonzero prefix
                if np.any(row[: len(prefix)] == 0.0):
                    raise InvalidInstanceError(
                        f"player {j} channel {ch}: zero mean before a nonzero one"
                    )
                if np.any(np.diff(prefix) >= 0.0):
                    raise InvalidInstanceError(
                        f"player {j} channel {ch}: means must strictly decrease with occupancy"
                    )

    def true_mean(self, player, channel, occupancy):
        """Expected reward; zero beyond the stored occupancy range."""
        if occupancy < 1:
            raise ValueError("occupancy is a head count, must be >= 1")
        if occupancy > self.max_occupancy:
            return 0.0
        return float(self.means[player, channel, occupancy - 1])

    def scaled(self, factor):
        """A copy with every mean multiplied by ``factor`` in (0, 1]."""
        return MeanRewardTable(self.means * factor)


def channel_counts(profile, num_channels):
    """Occupancy vector: how many players picked each channel."""
    counts = np.bincount(np.asarray(profile, dtype=int), minlength=num_channels)
    return counts


class SpectrumEnv:
    """Couples a mean table with a noise model and samples rewards.

    All sampling takes an explicit ``numpy.random.Generator``; the object
    itself holds no mutable state, so concurrent replicas just need their
    own generators.
    """

    def __init__(self, table: MeanRewardTable, noise: RewardModel):
        self.table = table
        self.noise = noise

    @property
    def num_players(self):
        return self.table.num_players

    @property
    def num_channels(self):
        return self.table.num_channels

    @property
    def max_occupancy(self):
        return self.table.max_occupancy

    def true_mean(self, player, channel, occupancy):
        return self.table.true_mean(player, channel, occupancy)

    def channel_counts(self, profile):
        return channel_counts(profile, self.num_channels)

    def profile_means(self, profile):
        """True mean reward of every player under the joint profile."""
        profile = np.asarray(profile, dtype=int)
        counts = self.channel_counts(profile)
        return np.array(
            [
                self.table.true_mean(j, profile[j], int(counts[profile[j]]))
                for j in range(self.num_players)
            ]
        )

    def sample_occupancy_rewards(self, player, channel, occupancy, size, rng):
        """Reward draws for one player at a fixed, known occupancy."""
        mean = self.table.true_mean(player, channel, occupancy)
        if mean == 0.0:
            return np.zeros(size)
        if self.noise.kind == "deterministic":
            return np.full(size, mean)
        draws = mean + self.noise.sigma * rng.standard_normal(size)
        return np.clip(draws, 0.0, 1.0)

    def sample_rewards(self, profile, rng):
        """One time unit of rewards for all players under ``profile``."""
        profile = np.asarray(profile, dtype=int)
        counts = self.channel_counts(profile)
        out = np.empty(self.num_players)
        for j in range(self.num_players):
            k = int(counts[profile[j]])
            out[j] = self.sample_occupancy_rewards(j, profile[j], k, (), rng)
        return out
