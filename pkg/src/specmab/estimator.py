"""Exploration-phase machinery: sample accumulation and 1-D clustering.

A player sampling channels uniformly sees, on each channel, a mixture of
reward levels (one per realized occupancy). Clustering the accumulated
samples recovers those levels; because rewards shrink as occupancy grows,
the largest cluster mean is read as the single-occupant level, the next as
two occupants, and so on.
"""
from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)


def explore_step(num_channels, rng):
    """Uniform channel pick for one exploration time unit."""
    return int(rng.integers(num_channels))


def _lloyd_1d(samples, centers, max_iter=100):
    """Lloyd iterations on 1-D data. Returns (centers, objective trace).

    The objective is the within-cluster sum of squares; it never increases
    from one iteration to the next. Empty clusters are dropped.
    """
    centers = np.asarray(centers, dtype=float)
    objectives = []
    for _ in range(max_iter):
        dist = np.abs(samples[:, None] - centers[None, :])
        assign = np.argmin(dist, axis=1)
        objectives.append(float(np.sum((samples - centers[assign]) ** 2)))
        new_centers = []
        for r in range(len(centers)):
            members = samples[assign == r]
            if len(members):
                new_centers.append(members.mean())
        new_centers = np.asarray(new_centers)
        if len(new_centers) == len(centers) and np.allclose(new_centers, centers, rtol=0, atol=0):
            break
        centers = new_centers
    dist = np.abs(samples[:, None] - centers[None, :])
    assign = np.argmin(dist, axis=1)
    objectives.append(float(np.sum((samples - centers[assign]) ** 2)))
    return centers, objectives


def _kmeans_plusplus_init(samples, k, rng):
    """Seeded k-means++ starting centers (distinct sample values)."""
    centers = [samples[rng.integers(len(samples))]]
    while len(centers) < k:
        d2 = np.min(np.abs(samples[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0.0:
            break
        pick = np.searchsorted(np.cumsum(d2), rng.random() * total)
        centers.append(samples[min(pick, len(samples) - 1)])
    return np.asarray(centers, dtype=float)


def cluster(samples, beta, rng, restarts=5, max_iter=100):
    """Cluster 1-D samples into at most ``beta`` groups; means sorted descending.

    Runs k-means++ initialization plus Lloyd refinement ``restarts`` times
    and keeps the lowest within-cluster sum of squares. When the data has
    fewer distinct values than ``beta``, one center per distinct value is
    returned.
    """
    samples = np.sort(np.asarray(samples, dtype=float))  # order-independent result
    if len(samples) == 0:
        raise ValueError("cluster needs at least one sample")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    distinct = np.unique(samples)
    if len(distinct) <= beta:
        return np.sort(distinct)[::-1].copy()
    best_centers = None
    best_obj = np.inf
    for _ in range(restarts):
        init = _kmeans_plusplus_init(samples, beta, rng)
        centers, objectives = _lloyd_1d(samples, init, max_iter=max_iter)
        if objectives[-1] < best_obj:
            best_obj = objectives[-1]
            best_centers = centers
    return np.sort(best_centers)[::-1].copy()


class SampleStore:
    """Per-channel reward samples, accumulated across epochs.

    Exact zeros are rejected at append time: a zero reward means the channel
    was over capacity, and keeping those draws would plant a phantom cluster
    at 0 that the occupancy mapping has no level for.
    """

    def __init__(self, num_channels):
        self.num_channels = num_channels
        self._chunks = [[] for _ in range(num_channels)]
        self.counts = np.zeros(num_channels, dtype=int)

    def add(self, channel, value):
        self.add_many(channel, np.atleast_1d(np.asarray(value, dtype=float)))

    def add_many(self, channel, values):
        values = np.asarray(values, dtype=float)
        kept = values[values != 0.0]
        if len(kept):
            self._chunks[channel].append(kept)
            self.counts[channel] += len(kept)

    def samples(self, channel):
        if not self._chunks[channel]:
            return np.empty(0)
        if len(self._chunks[channel]) > 1:
            self._chunks[channel] = [np.concatenate(self._chunks[channel])]
        return self._chunks[channel][0]

    def min_count(self):
        return int(self.counts.min())


class EstimateTable:
    """Reward-level estimates per channel, one slot per occupancy level.

    ``values[m, n-1]`` estimates the reward of channel ``m`` under
    occupancy ``n``. Slots beyond the number of clusters found are zero,
    and the nonzero prefix of each row is strictly decreasing.
    """

    def __init__(self, values, beta):
        self.values = np.asarray(values, dtype=float)
        self.beta = beta

    @property
    def num_channels(self):
        return self.values.shape[0]

    def level_estimate(self, channel, level):
        return float(self.values[channel, level - 1])

    def nonzero_levels(self, channel):
        """(levels, estimates) pairs with nonzero estimates, level-ordered."""
        row = self.values[channel]
        idx = np.flatnonzero(row)
        return idx + 1, row[idx]

    @classmethod
    def from_true_means(cls, table, player):
        """Noise-free estimates equal to the player's true reward levels."""
        return cls(table.means[player].copy(), table.max_occupancy)

    def __eq__(self, other):
        return (
            isinstance(other, EstimateTable)
            and self.beta == other.beta
            and np.array_equal(self.values, other.values)
        )


def rebuild_estimates(store: SampleStore, beta, rng) -> EstimateTable:
    """Cluster every channel's accumulated samples into an estimate table.

    Channels that have produced no (nonzero) samples yet get all-zero rows.
    """
    values = np.zeros((store.num_channels, beta))
    for m in range(store.num_channels):
        samples = store.samples(m)
        if len(samples) == 0:
            logger.info("channel %d has no samples yet; estimates left at zero", m)
            continue
        means = cluster(samples, beta, rng)
        values[m, : len(means)] = means
    return EstimateTable(values, beta)
