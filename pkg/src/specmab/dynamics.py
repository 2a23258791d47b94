"""Per-player protocol: epochs of explore, match, exploit.

Each epoch a player (1) samples channels uniformly to refine its reward-level
estimates, (2) plays a trial-and-error matching game in blocks ("plays") of
``c_eps`` time units, keeping a mood of content or discontent, and (3) commits
to the channel it was most often content on for an exploitation stretch that
doubles every epoch.

Players never see each other's actions, estimates or moods; everything they
learn arrives through their own reward stream.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .env import channel_counts
from .estimator import EstimateTable, SampleStore, rebuild_estimates
from .trace import RunTrace

logger = logging.getLogger(__name__)

CONTENT = "C"
DISCONTENT = "D"

# floor for eps**c when deriving the play length, so near-zero perturbations
# do not demand astronomically long plays
MIN_EPS_POW_C = 1e-12


class InvalidScheduleError(ValueError):
    """Raised when schedule tunables violate their constraints."""


@dataclass
class ScheduleParams:
    """All tunables of the epoch schedule and the matching dynamics."""

    t0: int
    c2: float
    c3: int
    c_eps: int
    delta: float
    rho: float
    eps: float
    exp_c: float
    beta: int
    reset_state_each_epoch: bool = False

    def validate(self, num_channels, max_occupancy):
        errors = []
        if self.exp_c <= num_channels * max_occupancy:
            errors.append(
                f"exp_c must exceed channels*occupancy={num_channels * max_occupancy}, "
                f"got {self.exp_c}"
            )
        for name in ("delta", "rho", "eps"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                errors.append(f"{name} must lie in (0, 1), got {v}")
        for name in ("t0", "c2", "c3", "c_eps", "beta"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be positive")
        return errors

    def eps_pow_c(self):
        return self.eps**self.exp_c


def required_play_length(eps, exp_c, delta_gap, nu_min):
    """Play length making a utility misread as unlikely as an experimentation.

    Averaging this many draws keeps the probability that the sample mean
    lands nearer a wrong reward level below ``eps**exp_c`` (Hoeffding).
    Either gap may be missing (single-profile instance, or no channel with
    two nonzero levels); whatever remains sets the scale.
    """
    gap = (delta_gap or 0.0) + (nu_min or 0.0)
    if gap <= 0.0:
        raise InvalidScheduleError(
            "no reward gap available to size plays from; set c_eps explicitly"
        )
    eps_pow = max(eps**exp_c, MIN_EPS_POW_C)
    return math.ceil(2.0 * math.log(2.0 / eps_pow) / gap**2)


def default_exploration_length(env, delta_gap):
    """Per-epoch exploration budget.

    Variance-scaled Chernoff sizing: accumulated over epochs it keeps the
    probability of any estimate being off by the matching gap decaying like
    e^(-epoch). Floored so zero-noise instances still visit every occupancy
    level.
    """
    k, m, n = env.num_players, env.num_channels, env.max_occupancy
    sized = 8.0 * env.noise.sigma**2 / delta_gap**2 * math.log(4.0 * k * m * n)
    return max(64, math.ceil(sized))


def derive_schedule(
    env,
    delta_gap,
    nu_min,
    *,
    eps=0.1,
    exp_c=None,
    c2=10.0,
    c3=100,
    delta=0.5,
    rho=0.5,
    t0=None,
    c_eps=None,
    beta=None,
    reset_state_each_epoch=False,
) -> ScheduleParams:
    """Fill unset tunables from the instance and the oracle gaps."""
    if exp_c is None:
        exp_c = env.num_channels * env.max_occupancy + 1
    if c_eps is None:
        c_eps = required_play_length(eps, exp_c, delta_gap, nu_min)
    if t0 is None:
        t0 = default_exploration_length(env, delta_gap or nu_min or 1.0)
    if beta is None:
        beta = env.max_occupancy
    params = ScheduleParams(
        t0=t0, c2=c2, c3=c3, c_eps=c_eps, delta=delta, rho=rho,
        eps=eps, exp_c=exp_c, beta=beta,
        reset_state_each_epoch=reset_state_each_epoch,
    )
    errors = params.validate(env.num_channels, env.max_occupancy)
    if errors:
        raise InvalidScheduleError("; ".join(errors))
    return params


@dataclass(frozen=True)
class EpochPlan:
    """Phase lengths of one epoch. Plays use ceilings so guarantees stay
    one-sided; counting starts partway through the matching phase, after
    the dynamics have had time to settle."""

    epoch: int
    explore_len: int
    matching_plays: int
    count_start: int
    exploit_len: int

    @classmethod
    def for_epoch(cls, epoch, params: ScheduleParams):
        raw = params.c2 * epoch ** (1.0 + params.delta)
        plays = math.ceil(raw)
        d = math.ceil(params.rho * raw)
        return cls(
            epoch=epoch,
            explore_len=params.t0,
            matching_plays=plays,
            count_start=max(d, 1),
            exploit_len=params.c3 * 2**epoch,
        )


@dataclass
class PlayerState:
    """Trial-and-error state: benchmark action, benchmark utility, mood,
    and the per-channel count of content plays in the current epoch."""

    baseline_action: int
    baseline_utility: float
    mood: str
    content_counts: np.ndarray


class Player:
    """One protocol participant; owns its samples, estimates and randomness."""

    def __init__(self, idx, num_channels, beta, action_rng, reward_rng, cluster_rng):
        self.idx = idx
        self.num_channels = num_channels
        self.beta = beta
        self.action_rng = action_rng
        self.reward_rng = reward_rng
        self.cluster_rng = cluster_rng
        self.store = SampleStore(num_channels)
        self.estimates: EstimateTable | None = None
        self.state = PlayerState(
            baseline_action=0,
            baseline_utility=0.0,
            mood=DISCONTENT,
            content_counts=np.zeros(num_channels, dtype=int),
        )

    def reset_state(self):
        self.state.baseline_action = 0
        self.state.baseline_utility = 0.0
        self.state.mood = DISCONTENT
        self.state.content_counts[:] = 0

    def rebuild_estimates(self):
        self.estimates = rebuild_estimates(self.store, self.beta, self.cluster_rng)


def make_players(env, params, seed):
    """Spawn players with independent substreams from one master seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(3 * env.num_players)
    return [
        Player(
            j,
            env.num_channels,
            params.beta,
            np.random.default_rng(children[3 * j]),
            np.random.default_rng(children[3 * j + 1]),
            np.random.default_rng(children[3 * j + 2]),
        )
        for j in range(env.num_players)
    ]


def choose_action(state: PlayerState, num_channels, eps_pow_c, rng):
    """Mood-driven channel choice: a content player experiments away from
    its benchmark with total probability ``eps**c``; a discontent player
    picks uniformly."""
    if state.mood == DISCONTENT:
        return int(rng.integers(num_channels))
    if num_channels == 1:
        return 0
    if rng.random() < eps_pow_c:
        other = int(rng.integers(num_channels - 1))
        return other + (other >= state.baseline_action)
    return state.baseline_action


def play_and_measure(env, player_idx, channel, occupancy, n_units, rng):
    """Average reward over one play at a fixed, already-resolved occupancy."""
    if env.noise.kind == "deterministic":
        # averaging identical draws must not pick up float accumulation error
        return env.true_mean(player_idx, channel, occupancy)
    draws = env.sample_occupancy_rewards(player_idx, channel, occupancy, n_units, rng)
    return float(draws.mean())


def utility_from_estimate(channel, r_bar, estimates: EstimateTable):
    """Map a play's average reward to the nearest nonzero reward level.

    Returns (occupancy level, utility). Ties break toward the lower level.
    A channel with no nonzero estimates yields (None, 0.0); the zero utility
    then drives the player toward discontent.
    """
    levels, values = estimates.nonzero_levels(channel)
    if len(values) == 0:
        return None, 0.0
    best = int(np.argmin(np.abs(values - r_bar)))
    return int(levels[best]), float(values[best])


def update_state(state: PlayerState, action, utility, eps, rng):
    """Benchmark update: a content player whose play matched its benchmark
    keeps it; any other outcome is adopted as the new benchmark and the
    player stays content only with probability eps**(1 - utility)."""
    if (
        state.mood == CONTENT
        and action == state.baseline_action
        and utility == state.baseline_utility
    ):
        return
    accept = eps ** (1.0 - utility)
    state.baseline_action = action
    state.baseline_utility = utility
    state.mood = CONTENT if rng.random() < accept else DISCONTENT


def _matching_loop(
    players,
    env,
    params,
    n_plays,
    count_start,
    time_budget=None,
    on_play=None,
    record_play=None,
):
    """Shared matching-phase inner loop.

    Runs up to ``n_plays`` synchronous plays of ``params.c_eps`` time units,
    truncating the final play if the time budget runs out first. Content
    counts start incrementing at play ``count_start`` (1-based) and use the
    mood after the play's state update. Returns (plays done, time used,
    truncated flag).
    """
    eps_pow_c = params.eps_pow_c()
    num_channels = env.num_channels
    elapsed = 0
    for play_idx in range(1, n_plays + 1):
        length = params.c_eps
        truncated = False
        if time_budget is not None and time_budget - elapsed < length:
            length = time_budget - elapsed
            truncated = True
            if length <= 0:
                return play_idx - 1, elapsed, True
        profile = tuple(
            choose_action(p.state, num_channels, eps_pow_c, p.action_rng)
            for p in players
        )
        counts = channel_counts(profile, num_channels)
        for j, p in enumerate(players):
            a = profile[j]
            r_bar = play_and_measure(env, j, a, int(counts[a]), length, p.reward_rng)
            if truncated:
                continue  # incomplete play: no benchmark update
            _, utility = utility_from_estimate(a, r_bar, p.estimates)
            update_state(p.state, a, utility, params.eps, p.action_rng)
            if play_idx >= count_start and p.state.mood == CONTENT:
                p.state.content_counts[a] += 1
        if record_play is not None:
            record_play(profile, length)
        elapsed += length
        if truncated:
            return play_idx, elapsed, True
        if on_play is not None:
            on_play(play_idx, profile)
    return n_plays, elapsed, False


def run_matching_phase(players, env, plan: EpochPlan, params: ScheduleParams, on_play=None):
    """Run one epoch's matching phase; returns the per-player content counts."""
    for p in players:
        p.state.content_counts[:] = 0
    _matching_loop(
        players, env, params, plan.matching_plays, plan.count_start, on_play=on_play
    )
    return [p.state.content_counts.copy() for p in players]


def exploit_action(content_counts, estimates: EstimateTable):
    """Channel played throughout exploitation: the one with the most content
    plays. A player that was never content falls back to its best-looking
    channel by single-occupant estimate."""
    counts = np.asarray(content_counts)
    if counts.max() > 0:
        return int(np.argmax(counts))
    fallback = int(np.argmax(estimates.values[:, 0]))
    logger.info("player never content during counting; falling back to channel %d", fallback)
    return fallback


def run_exploration(players, env, n, j1=0.0):
    """Vectorized exploration: ``n`` time units of uniform channel sampling.

    Returns the (n, players) action matrix and the per-unit regret vector
    relative to ``j1``. Rewards are appended to each player's sample store
    (exact zeros are filtered there).
    """
    num_players, num_channels = env.num_players, env.num_channels
    actions = np.empty((n, num_players), dtype=int)
    for j, p in enumerate(players):
        actions[:, j] = p.action_rng.integers(num_channels, size=n)
    counts = np.zeros((n, num_channels), dtype=int)
    np.add.at(counts, (np.arange(n)[:, None], actions), 1)
    occupancy = counts[np.arange(n)[:, None], actions]
    means = np.zeros((n, num_players))
    within = occupancy <= env.max_occupancy
    table = env.table.means
    for j in range(num_players):
        w = within[:, j]
        means[w, j] = table[j, actions[w, j], occupancy[w, j] - 1]
    for j, p in enumerate(players):
        if env.noise.kind == "deterministic":
            col = means[:, j].copy()
        else:
            col = means[:, j] + env.noise.sigma * p.reward_rng.standard_normal(n)
            np.clip(col, 0.0, 1.0, out=col)
            col[means[:, j] == 0.0] = 0.0
        for m in range(num_channels):
            p.store.add_many(m, col[actions[:, j] == m])
    regrets = j1 - means.sum(axis=1)
    return actions, regrets


def run_horizon(env, oracle, params: ScheduleParams, horizon, seed) -> RunTrace:
    """Run the full protocol for ``horizon`` time units.

    Epochs run until the horizon truncates one mid-phase; truncation counts
    elapsed time exactly. Fully deterministic given (config, seed).
    """
    solution = oracle.solve()
    j1 = solution.j1
    players = make_players(env, params, seed)
    trace = RunTrace(
        num_players=env.num_players,
        horizon=horizon,
        optimal_profile=solution.optimal_profile,
        j1=j1,
    )
    t = 0
    epoch = 0
    while t < horizon:
        epoch += 1
        plan = EpochPlan.for_epoch(epoch, params)
        if params.reset_state_each_epoch and epoch > 1:
            for p in players:
                p.reset_state()

        n_explore = min(plan.explore_len, horizon - t)
        actions, regrets = run_exploration(players, env, n_explore, j1)
        trace.add_exploration(epoch, actions, regrets)
        t += n_explore
        if n_explore < plan.explore_len:
            trace.mark_truncated(epoch, "explore")
            break

        for p in players:
            p.rebuild_estimates()
        for p in players:
            p.state.content_counts[:] = 0

        plays_done, time_used, truncated = _matching_loop(
            players,
            env,
            params,
            plan.matching_plays,
            plan.count_start,
            time_budget=horizon - t,
            record_play=lambda profile, length: trace.add_play(
                epoch, profile, length, oracle.regret_increment(profile)
            ),
        )
        t += time_used
        if truncated or plays_done < plan.matching_plays:
            trace.mark_truncated(epoch, "match")
            break

        exploit_profile = tuple(
            exploit_action(p.state.content_counts, p.estimates) for p in players
        )
        exploit_len = min(plan.exploit_len, horizon - t)
        if exploit_len > 0:
            trace.add_exploit(
                epoch, exploit_profile, exploit_len, oracle.regret_increment(exploit_profile)
            )
        t += exploit_len
        completed = exploit_len == plan.exploit_len
        trace.record_epoch(
            epoch=epoch,
            exploit_profile=exploit_profile,
            completed=completed,
            f_counts=[p.state.content_counts.copy() for p in players],
            estimates=[p.estimates.values.copy() for p in players],
        )
        if not completed:
            trace.mark_truncated(epoch, "exploit")
            break
    trace.finish([p.estimates.values.copy() if p.estimates else None for p in players])
    return trace
