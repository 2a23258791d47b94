"""Config file ingestion and validation.

Instances are TOML: an ``[instance]`` table with the dense mean matrix (one
row per (player, channel), occupancy levels as columns), a ``[noise]`` table,
an optional ``[schedule]`` table for tunables, and an optional ``[run]``
table with horizon/seeds defaults. Loaded values are echoed verbatim into
run summaries so outputs are self-describing.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from .dynamics import derive_schedule
from .env import InvalidInstanceError, MeanRewardTable, RewardModel, SpectrumEnv
from .oracle import DEFAULT_ENUMERATION_CAP, MatchingOracle

OUTPUT_DIR_ENV_VAR = "SPECMAB_OUT"

# separability defaults used by validation; the condition is checked at
# warning level only, so these just set a consistent reporting scale
DEFAULT_SEP_CONSTANT = 0.1
DEFAULT_SEP_EPS2 = 0.0025


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    """Validated instance + tunables, ready to run."""

    env: SpectrumEnv
    schedule: object
    horizon: int
    seeds: list
    out_dir: str
    raw: dict = field(repr=False, default_factory=dict)
    warnings: list = field(default_factory=list)
    delta_gap: float | None = None
    nu_min: float | None = None


def _get(raw, path, default=None):
    node = raw
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def load_raw(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def validate_config(raw, *, horizon=None, seeds=None, out_dir=None) -> RunConfig:
    """Check every model and schedule invariant; collect all errors at once.

    Fatal violations raise ``ConfigError`` listing each offending field.
    The separability condition is evaluated at warning level only.
    """
    errors = []
    warnings = []

    players = _get(raw, "instance.players")
    channels = _get(raw, "instance.channels")
    max_occ = _get(raw, "instance.max_occupancy")
    rows = _get(raw, "instance.means")
    for name, value in (
        ("instance.players", players),
        ("instance.channels", channels),
        ("instance.max_occupancy", max_occ),
        ("instance.means", rows),
    ):
        if value is None:
            errors.append(f"{name}: missing")
    if errors:
        raise ConfigError(errors)

    table = None
    if len(rows) != players * channels:
        errors.append(
            f"instance.means: expected {players * channels} rows "
            f"(one per player/channel), got {len(rows)}"
        )
    elif any(len(r) != max_occ for r in rows):
        errors.append(f"instance.means: every row needs {max_occ} columns")
    else:
        means = np.asarray(rows, dtype=float).reshape(players, channels, max_occ)
        try:
            table = MeanRewardTable(means)
        except InvalidInstanceError as exc:
            errors.append(f"instance.means: {exc}")

    sigma = _get(raw, "noise.sigma", 0.05)
    kind = _get(raw, "noise.kind", "truncated-gaussian")
    noise = None
    try:
        noise = RewardModel(sigma=sigma, kind=kind)
    except InvalidInstanceError as exc:
        errors.append(f"noise: {exc}")

    if errors:
        raise ConfigError(errors)

    env = SpectrumEnv(table, noise)
    oracle = MatchingOracle(env)
    if channels**players > DEFAULT_ENUMERATION_CAP:
        warnings.append(
            f"{channels}**{players} profiles exceed the oracle cap; "
            "runs will have no ground-truth regret"
        )
        delta_gap = _get(raw, "schedule.delta_gap")
        nu_min = _get(raw, "schedule.nu_min")
        if delta_gap is None:
            errors.append(
                "schedule.delta_gap: required when the instance is too large "
                "for the oracle"
            )
    else:
        solution = oracle.solve()
        if not solution.unique:
            warnings.append("optimal matching is not unique; delta is 0")
        # agents get the oracle-exact gaps unless the config supplies
        # looser bounds to study robustness
        delta_gap = _get(raw, "schedule.delta_gap", solution.delta)
        nu_min = _get(raw, "schedule.nu_min", oracle.nu_min())
        report = oracle.check_separability(
            _get(raw, "schedule.sep_constant", DEFAULT_SEP_CONSTANT),
            _get(raw, "schedule.sep_eps2", DEFAULT_SEP_EPS2),
        )
        if not report.passed:
            warnings.append(
                f"separability condition violated for {len(report.offending)} "
                f"occupancy pairs (threshold {report.threshold:.4f})"
            )

    schedule = None
    if not errors:
        overrides = {
            key: _get(raw, f"schedule.{key}")
            for key in (
                "eps", "exp_c", "c2", "c3", "delta", "rho", "t0", "c_eps", "beta",
            )
            if _get(raw, f"schedule.{key}") is not None
        }
        if _get(raw, "schedule.reset_state_each_epoch") is not None:
            overrides["reset_state_each_epoch"] = _get(raw, "schedule.reset_state_each_epoch")
        try:
            schedule = derive_schedule(env, delta_gap, nu_min, **overrides)
        except Exception as exc:
            errors.append(f"schedule: {exc}")

    if errors:
        raise ConfigError(errors)

    horizon = horizon if horizon is not None else _get(raw, "run.horizon", 1_000_000)
    seeds = seeds if seeds is not None else _get(raw, "run.seeds", [0])
    if horizon < 0:
        errors.append(f"run.horizon: must be nonnegative, got {horizon}")
    if not seeds:
        errors.append("run.seeds: at least one seed required")
    if errors:
        raise ConfigError(errors)

    out_dir = (
        out_dir
        or _get(raw, "run.out")
        or os.environ.get(OUTPUT_DIR_ENV_VAR)
        or "runs"
    )
    return RunConfig(
        env=env,
        schedule=schedule,
        horizon=int(horizon),
        seeds=[int(s) for s in seeds],
        out_dir=out_dir,
        raw=raw,
        warnings=warnings,
        delta_gap=delta_gap,
        nu_min=nu_min,
    )


def load_config(path, **kwargs) -> RunConfig:
    return validate_config(load_raw(path), **kwargs)
