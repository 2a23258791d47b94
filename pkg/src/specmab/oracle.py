"""Brute-force ground truth: best matching, reward gaps and regret accounting.

Occupancy-dependent rewards make the assignment problem nonlinear, so the
oracle enumerates every joint profile. That is the point: it is the
independent reference the learning dynamics are checked against, and it is
only ever run at desk scale.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .env import SpectrumEnv

DEFAULT_ENUMERATION_CAP = 10_000_000


class OracleTooLargeError(RuntimeError):
    """The profile space exceeds the enumeration cap."""


@dataclass(frozen=True)
class MatchingSolution:
    optimal_profile: tuple
    j1: float
    j2: float | None
    delta: float | None
    unique: bool


@dataclass(frozen=True)
class SeparabilityReport:
    nu_min: float | None
    threshold: float
    passed: bool
    offending: list = field(default_factory=list)


class MatchingOracle:
    """Exhaustive solver over all channels**players joint profiles."""

    def __init__(self, env: SpectrumEnv, enumeration_cap=DEFAULT_ENUMERATION_CAP):
        self.env = env
        self.enumeration_cap = enumeration_cap
        self._solution = None

    def system_reward(self, profile):
        """Sum of all players' true means under the profile's occupancies."""
        return float(sum(self.env.profile_means(profile)))

    def solve(self) -> MatchingSolution:
        """Best profile, best and second-best system reward values.

        Ties at the top are broken toward the lexicographically smallest
        profile. ``j2`` is the largest reward value strictly below ``j1``
        (not the second-best profile, which could tie the best), so
        ``delta`` is positive exactly when the optimum is unique in value.
        """
        if self._solution is not None:
            return self._solution
        m, k = self.env.num_channels, self.env.num_players
        if m**k > self.enumeration_cap:
            raise OracleTooLargeError(
                f"instance too large for oracle: {m}**{k} profiles exceed cap "
                f"{self.enumeration_cap}"
            )
        best_profile = None
        j1 = -math.inf
        j2 = -math.inf
        n_best = 0
        for profile in itertools.product(range(m), repeat=k):
            value = self.system_reward(profile)
            if value > j1:
                j2 = j1 if n_best > 0 else -math.inf
                j1 = value
                best_profile = profile
                n_best = 1
            elif value == j1:
                n_best += 1
            elif value > j2:
                j2 = value
        mn = m * self.env.max_occupancy
        self._solution = MatchingSolution(
            optimal_profile=best_profile,
            j1=j1,
            j2=None if j2 == -math.inf else j2,
            delta=None if j2 == -math.inf else (j1 - j2) / (2 * mn),
            unique=n_best == 1,
        )
        return self._solution

    def nu_min(self):
        """Smallest gap between distinct nonzero occupancy means of one
        (player, channel). ``None`` when no channel has two nonzero levels;
        the play-length bound then falls back to the matching gap alone."""
        gaps = []
        means = self.env.table.means
        for j in range(self.env.num_players):
            for ch in range(self.env.num_channels):
                row = means[j, ch]
                levels = row[row != 0.0]
                for a, b in itertools.combinations(levels, 2):
                    gaps.append(float(abs(a - b)))
        return min(gaps) if gaps else None

    def check_separability(self, c_sep, eps2, sigma=None) -> SeparabilityReport:
        """Check every nonzero occupancy-mean gap against the clustering
        separability threshold. Report-only: the condition is sufficient for
        estimation, not necessary, so violations are warnings."""
        if sigma is None:
            sigma = self.env.noise.sigma
        m, k = self.env.num_channels, self.env.num_players
        # single-channel instances have no cross-channel confusion term
        exponent = (k - 1) / (m - 1) if m > 1 else 0.0
        threshold = 4.0 * m * c_sep * math.exp(exponent) * math.sqrt(sigma**2 + eps2)
        offending = []
        means = self.env.table.means
        for j in range(k):
            for ch in range(m):
                row = means[j, ch]
                idx = np.flatnonzero(row)
                for a, b in itertools.combinations(idx, 2):
                    gap = float(abs(row[a] - row[b]))
                    if gap < threshold:
                        offending.append((j, ch, int(a) + 1, int(b) + 1, gap))
        return SeparabilityReport(
            nu_min=self.nu_min(),
            threshold=threshold,
            passed=not offending,
            offending=offending,
        )

    def regret_increment(self, profile):
        """Per-time-unit regret of playing ``profile`` instead of the optimum."""
        return self.solve().j1 - self.system_reward(profile)
