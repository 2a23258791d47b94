"""Exact Markov-chain view of the matching dynamics on small instances.

The joint state of all players (benchmark action, benchmark utility, mood)
is finite once utilities are restricted to each player's possible reward
levels. The transition kernel follows directly from the mood-driven action
rule and the benchmark update, so recurrence structure and stationary mass
can be computed instead of simulated: the unperturbed process must collapse
to the all-discontent class plus one singleton per aligned joint profile,
and for small experimentation rates the stationary mass must pile onto the
welfare-maximizing aligned state.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import CONTENT, DISCONTENT, utility_from_estimate
from .env import channel_counts
from .estimator import EstimateTable

DEFAULT_STATE_CAP = 100_000
DENSE_SOLVE_CAP = 10_000

MOODS = (CONTENT, DISCONTENT)


class ChainTooLargeError(RuntimeError):
    pass


class PowerIterationError(RuntimeError):
    pass


@dataclass
class StateSpace:
    """Enumerated joint states with mixed-radix indexing.

    A player's local state is (action, utility, mood) with utility drawn
    from that player's finite level set (its nonzero estimates plus 0).
    """

    num_players: int
    num_channels: int
    utilities: list          # per player: ascending array of possible utilities
    u_index: list            # per player: value -> position in utilities
    play_utility: np.ndarray  # [player, channel, occupancy-1] -> utility value
    channel_levels: list     # per player, per channel: nonzero estimate values
    n_local: list
    strides: list
    n_states: int

    def local_index(self, player, action, utility, mood):
        u_idx = self.u_index[player][utility]
        mood_idx = 0 if mood == CONTENT else 1
        return (action * len(self.utilities[player]) + u_idx) * 2 + mood_idx

    def decode_local(self, player, local_idx):
        mood = MOODS[local_idx % 2]
        rest = local_idx // 2
        n_u = len(self.utilities[player])
        return rest // n_u, float(self.utilities[player][rest % n_u]), mood

    def encode(self, per_player):
        idx = 0
        for j, (a, u, mood) in enumerate(per_player):
            idx += self.strides[j] * self.local_index(j, a, u, mood)
        return idx

    def decode(self, idx):
        out = []
        for j in range(self.num_players):
            local = (idx // self.strides[j]) % self.n_local[j]
            out.append(self.decode_local(j, local))
        return tuple(out)


def _exact_estimates(env):
    return [
        EstimateTable.from_true_means(env.table, j) for j in range(env.num_players)
    ]


def enumerate_states(env, estimates=None, cap=DEFAULT_STATE_CAP) -> StateSpace:
    """Build the joint state space.

    By default utilities come from the true reward levels, isolating the
    dynamics' behaviour from estimation error; pass per-player estimate
    tables to analyse the chain a particular player population actually
    plays on.
    """
    if estimates is None:
        estimates = _exact_estimates(env)
    k, m = env.num_players, env.num_channels
    utilities = []
    channel_levels = []
    play_utility = np.zeros((k, m, k))
    for j in range(k):
        values = {0.0}
        levels = []
        for ch in range(m):
            _, nonzero = estimates[j].nonzero_levels(ch)
            values.update(float(v) for v in nonzero)
            levels.append([float(v) for v in nonzero])
            for occ in range(1, k + 1):
                true = env.true_mean(j, ch, occ)
                _, util = utility_from_estimate(ch, true, estimates[j])
                play_utility[j, ch, occ - 1] = util
        utilities.append(np.array(sorted(values)))
        channel_levels.append(levels)
    n_local = [m * len(u) * 2 for u in utilities]
    n_states = 1
    for n in n_local:
        n_states *= n
    if n_states > cap:
        raise ChainTooLargeError(f"{n_states} joint states exceed cap {cap}")
    strides = []
    acc = 1
    for n in reversed(n_local):
        strides.append(acc)
        acc *= n
    strides.reverse()
    return StateSpace(
        num_players=k,
        num_channels=m,
        utilities=utilities,
        u_index=[{float(v): i for i, v in enumerate(u)} for u in utilities],
        play_utility=play_utility,
        channel_levels=channel_levels,
        n_local=n_local,
        strides=strides,
        n_states=n_states,
    )


def _action_distribution(action, mood, num_channels, eps_pow_c):
    if mood == DISCONTENT:
        p = 1.0 / num_channels
        return [(a, p) for a in range(num_channels)]
    if eps_pow_c == 0.0 or num_channels == 1:
        return [(action, 1.0)]
    dist = [(action, 1.0 - eps_pow_c)]
    spread = eps_pow_c / (num_channels - 1)
    dist.extend((a, spread) for a in range(num_channels) if a != action)
    return dist


def _nearest_other(space, player, channel, utility):
    """Closest different level of the played channel; a misread can only land
    on another estimate of that channel."""
    others = [u for u in space.channel_levels[player][channel] if u != utility]
    if not others:
        return None
    return min(others, key=lambda v: abs(v - utility))


def _update_outcomes(space, player, local, action, utility, eps):
    """Per-player benchmark-update outcomes for one play, as (local, prob)."""
    a0, u0, mood = space.decode_local(player, local)
    if mood == CONTENT and action == a0 and utility == u0:
        return [(local, 1.0)]
    accept = eps ** (1.0 - utility)
    out = []
    if accept > 0.0:
        out.append((space.local_index(player, action, utility, CONTENT), accept))
    if accept < 1.0:
        out.append((space.local_index(player, action, utility, DISCONTENT), 1.0 - accept))
    return out


def build_kernel(space: StateSpace, eps, exp_c, p_eps=0.0):
    """Row-stochastic transition matrix of one matching play.

    With ``p_eps > 0`` each player independently misreads its utility as the
    nearest other level with that probability before updating.
    """
    n = space.n_states
    kernel = np.zeros((n, n))
    eps_pow_c = eps**exp_c if eps > 0.0 else 0.0
    m = space.num_channels
    for state in range(n):
        locals_ = [
            (state // space.strides[j]) % space.n_local[j]
            for j in range(space.num_players)
        ]
        decoded = [space.decode_local(j, locals_[j]) for j in range(space.num_players)]
        action_dists = [
            _action_distribution(a, mood, m, eps_pow_c) for a, _, mood in decoded
        ]
        for combo in itertools.product(*action_dists):
            profile = tuple(a for a, _ in combo)
            p_profile = 1.0
            for _, p in combo:
                p_profile *= p
            if p_profile == 0.0:
                continue
            counts = channel_counts(profile, m)
            per_player = []
            for j in range(space.num_players):
                a = profile[j]
                correct = float(space.play_utility[j, a, counts[a] - 1])
                branches = [(correct, 1.0 - p_eps)] if p_eps > 0.0 else [(correct, 1.0)]
                if p_eps > 0.0:
                    wrong = _nearest_other(space, j, a, correct)
                    if wrong is None:
                        branches = [(correct, 1.0)]
                    else:
                        branches.append((wrong, p_eps))
                outcomes = {}
                for utility, p_u in branches:
                    for local, p_loc in _update_outcomes(
                        space, j, locals_[j], a, utility, eps
                    ):
                        outcomes[local] = outcomes.get(local, 0.0) + p_u * p_loc
                per_player.append(list(outcomes.items()))
            for joint in itertools.product(*per_player):
                target = 0
                p_joint = p_profile
                for j, (local, p_loc) in enumerate(joint):
                    target += space.strides[j] * local
                    p_joint *= p_loc
                kernel[state, target] += p_joint
    return kernel


def tarjan_scc(adjacency):
    """Strongly connected components of a directed graph, iteratively.

    ``adjacency`` maps each node to an iterable of successors. Returns a
    label per node; labels are dense but otherwise arbitrary.
    """
    n = len(adjacency)
    index = np.full(n, -1, dtype=int)
    lowlink = np.zeros(n, dtype=int)
    on_stack = np.zeros(n, dtype=bool)
    labels = np.full(n, -1, dtype=int)
    counter = 0
    n_components = 0
    stack = []
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, child_pos = work[-1]
            if child_pos == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            successors = adjacency[v]
            while child_pos < len(successors):
                w = successors[child_pos]
                child_pos += 1
                if index[w] == -1:
                    work[-1] = (v, child_pos)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    labels[w] = n_components
                    if w == v:
                        break
                n_components += 1
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return labels, n_components


def recurrence_classes(kernel):
    """Closed communicating classes of the kernel's support digraph.

    For the unperturbed (eps = 0) kernel these are exactly the recurrence
    classes of the matching dynamics. Classes are sorted by smallest member.
    """
    support = [np.flatnonzero(row) for row in kernel]
    labels, n_components = tarjan_scc(support)
    closed = np.ones(n_components, dtype=bool)
    for v, successors in enumerate(support):
        for w in successors:
            if labels[w] != labels[v]:
                closed[labels[v]] = False
                break
    classes = [
        sorted(np.flatnonzero(labels == c).tolist())
        for c in range(n_components)
        if closed[c]
    ]
    classes.sort(key=lambda members: members[0])
    return classes


def stationary_distribution(kernel, dense_cap=DENSE_SOLVE_CAP, tol=1e-10, max_iters=200_000):
    """Solve pi = pi P; direct solve when small, power iteration when large."""
    n = kernel.shape[0]
    if n <= dense_cap:
        a = kernel.T - np.eye(n)
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        pi = np.linalg.solve(a, b)
    else:
        pi = np.full(n, 1.0 / n)
        residual = np.inf
        for _ in range(max_iters):
            nxt = pi @ kernel
            residual = float(np.abs(nxt - pi).max())
            pi = nxt
            if residual <= 1e-12:
                break
        else:
            raise PowerIterationError(
                f"power iteration did not converge: residual {residual:.3e}"
            )
    if pi.min() < -tol:
        raise ValueError(f"stationary solve produced negative mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return pi


def is_unichain(kernel):
    """True when exactly one closed communicating class exists, so the
    stationary distribution is unique.

    The enumerated product space always contains combinations no play can
    produce (a benchmark utility must be a level of the benchmark channel),
    and those states are transient by construction; what positive
    experimentation buys is that everything reachable communicates.
    """
    return len(recurrence_classes(kernel)) == 1


# ── state classification ──────────────────────────────────────────────


def aligned_content_states(space: StateSpace):
    """One state per joint profile: everyone content with the utility the
    profile actually pays. Maps profile -> state index."""
    out = {}
    for profile in itertools.product(range(space.num_channels), repeat=space.num_players):
        counts = channel_counts(profile, space.num_channels)
        per_player = [
            (profile[j], float(space.play_utility[j, profile[j], counts[profile[j]] - 1]), CONTENT)
            for j in range(space.num_players)
        ]
        out[profile] = space.encode(per_player)
    return out


def all_discontent_indices(space: StateSpace):
    """Indices of every state in which all players are discontent."""
    idx = []
    for state in range(space.n_states):
        if all(mood == DISCONTENT for _, _, mood in space.decode(state)):
            idx.append(state)
    return np.array(idx, dtype=int)


def optimal_state_index(space: StateSpace, optimal_profile):
    return aligned_content_states(space)[tuple(optimal_profile)]


def stability_report(env, solution, eps_grid, exp_c, estimates=None, p_eps=0.0):
    """Stationary mass on the optimal aligned state across an eps grid.

    Returns a dict with one row per eps: mass on the optimal state, on all
    aligned-content singletons, and on the all-discontent set, plus whether
    majority mass on the optimal state was reached anywhere on the grid.
    """
    space = enumerate_states(env, estimates)
    aligned = aligned_content_states(space)
    star = aligned[tuple(solution.optimal_profile)]
    others = [idx for profile, idx in aligned.items() if idx != star]
    discontent = all_discontent_indices(space)
    rows = []
    for eps in eps_grid:
        kernel = build_kernel(space, eps, exp_c, p_eps=p_eps)
        pi = stationary_distribution(kernel)
        rows.append(
            {
                "eps": eps,
                "pi_optimal": float(pi[star]),
                "pi_aligned_total": float(pi[list(aligned.values())].sum()),
                "pi_discontent": float(pi[discontent].sum()),
                "max_other_aligned": float(pi[others].max()) if others else 0.0,
            }
        )
    return {
        "n_states": space.n_states,
        "optimal_profile": list(solution.optimal_profile),
        "rows": rows,
        "majority_achieved": any(r["pi_optimal"] > 0.5 for r in rows),
    }
