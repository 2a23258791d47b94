"""Command-line front end: validate configs, query the oracle, run and sweep
simulations, and analyze the matching chain."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback

import numpy as np

from . import chain as chain_mod
from .config import ConfigError, load_config, validate_config
from .dynamics import run_horizon
from .oracle import MatchingOracle


def _add_common(parser):
    parser.add_argument("--config", required=True, help="instance TOML file")
    parser.add_argument("--out", default=None, help="output directory")


def _seed_list(text):
    return [int(s) for s in text.replace(",", " ").split()]


def _eps_list(text):
    return [float(s) for s in text.replace(",", " ").split()]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="specmab",
        description="multi-player spectrum-access bandit simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a config file")
    _add_common(p_validate)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum and gap report")
    _add_common(p_oracle)

    p_run = sub.add_parser("run", help="simulate one or more seeds")
    _add_common(p_run)
    p_run.add_argument("--seed", type=_seed_list, default=None, help="seed list")
    p_run.add_argument("--horizon", type=int, default=None, help="time units")

    p_sweep = sub.add_parser("sweep", help="grid sweep over eps, sigma or horizon")
    _add_common(p_sweep)
    p_sweep.add_argument("--seed", type=_seed_list, default=None)
    p_sweep.add_argument("--horizon", type=int, default=None)
    p_sweep.add_argument("--eps-grid", type=_eps_list, default=None)
    p_sweep.add_argument("--sigma-grid", type=_eps_list, default=None)
    p_sweep.add_argument("--horizon-grid", type=_seed_list, default=None)

    p_chain = sub.add_parser("chain-analyze", help="exact chain stability report")
    _add_common(p_chain)
    p_chain.add_argument(
        "--eps-grid", type=_eps_list, default=[0.3, 0.2, 0.1, 0.05]
    )
    p_chain.add_argument("--p-eps", type=float, default=0.0)
    return parser


def _ensure_out(config, args):
    out = args.out or config.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_validate(args):
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print("invalid config:")
        for err in exc.errors:
            print(f"  error: {err}")
        return 2
    print(f"config ok: {config.env.num_players} players, "
          f"{config.env.num_channels} channels, "
          f"max occupancy {config.env.max_occupancy}")
    print(f"  delta_gap={config.delta_gap}  nu_min={config.nu_min}")
    print(f"  schedule: {config.schedule}")
    for warning in config.warnings:
        print(f"  warning: {warning}")
    return 0


def cmd_oracle(args):
    config = load_config(args.config)
    oracle = MatchingOracle(config.env)
    solution = oracle.solve()
    report = oracle.check_separability(0.1, 0.0025)
    print(f"optimal profile: {list(solution.optimal_profile)}")
    print(f"J1 = {solution.j1!r}")
    print(f"J2 = {solution.j2!r}")
    print(f"delta = {solution.delta!r}")
    print(f"unique = {solution.unique}")
    print(f"nu_min = {report.nu_min!r}")
    print(f"separability threshold = {report.threshold!r} "
          f"({'passed' if report.passed else 'violated'})")
    for j, ch, n1, n2, gap in report.offending:
        print(f"  offending: player {j} channel {ch} levels {n1}/{n2} gap {gap!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(
            os.path.join(args.out, "oracle.json"),
            {
                "optimal_profile": list(solution.optimal_profile),
                "j1": solution.j1,
                "j2": solution.j2,
                "delta": solution.delta,
                "unique": solution.unique,
                "nu_min": report.nu_min,
                "separability_threshold": report.threshold,
                "separability_passed": report.passed,
                "offending": [list(o) for o in report.offending],
            },
        )
    return 0


def _run_one(config, seed, horizon=None):
    oracle = MatchingOracle(config.env)
    trace = run_horizon(
        config.env, oracle, config.schedule, horizon or config.horizon, seed
    )
    summary = trace.summary()
    summary["seed"] = seed
    summary["config"] = config.raw
    return trace, summary


def cmd_run(args):
    config = load_config(args.config, horizon=args.horizon, seeds=args.seed)
    out = _ensure_out(config, args)
    summaries = []
    manifest = {
        "config_file": os.path.abspath(args.config),
        "config": config.raw,
        "horizon": config.horizon,
        "seeds": config.seeds,
        "traces": [],
    }
    for seed in config.seeds:
        trace, summary = _run_one(config, seed)
        trace_path = os.path.join(out, f"trace_seed{seed}.csv")
        with open(trace_path, "w") as fh:
            trace.write_csv(fh)
        _write_json(os.path.join(out, f"summary_seed{seed}.json"), summary)
        manifest["traces"].append(os.path.basename(trace_path))
        summaries.append(summary)
        print(
            f"seed {seed}: R(T)={summary['total_regret']:.2f} "
            f"({summary['regret_per_unit']:.5f}/unit), "
            f"final profile {summary['final_exploit_profile']} "
            f"{'== optimal' if summary['final_matched_optimal'] else '!= optimal'}"
        )
    matched = [s["final_matched_optimal"] for s in summaries]
    aggregate = {
        "seeds": config.seeds,
        "optimal_profile": summaries[0]["optimal_profile"],
        "fraction_matched_optimal": float(np.mean([bool(m) for m in matched])),
        "mean_total_regret": float(np.mean([s["total_regret"] for s in summaries])),
        "per_seed": [
            {
                "seed": s["seed"],
                "total_regret": s["total_regret"],
                "final_exploit_profile": s["final_exploit_profile"],
                "final_matched_optimal": s["final_matched_optimal"],
            }
            for s in summaries
        ],
    }
    _write_json(os.path.join(out, "aggregate.json"), aggregate)
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(f"matched optimal in {aggregate['fraction_matched_optimal']:.0%} of seeds")
    return 0

SWEEP_COLUMNS = [
    "param", "value", "seed", "horizon", "total_regret", "regret_per_unit",
    "final_exploit_profile", "matched_optimal", "error",
]


def _sweep_points(args, config):
    points = []
    if args.eps_grid:
        points += [("eps", v) for v in args.eps_grid]
    if args.sigma_grid:
        points += [("sigma", v) for v in args.sigma_grid]
    if args.horizon_grid:
        points += [("horizon", v) for v in args.horizon_grid]
    return points


def cmd_sweep(args):
    config = load_config(args.config, horizon=args.horizon, seeds=args.seed)
    out = _ensure_out(config, args)
    rows = []
    for param, value in _sweep_points(args, config):
        raw = json.loads(json.dumps(config.raw))  # deep copy
        horizon = config.horizon
        if param == "eps":
            raw.setdefault("schedule", {})["eps"] = value
        elif param == "sigma":
            raw.setdefault("noise", {})["sigma"] = value
        elif param == "horizon":
            horizon = int(value)
        try:
            point_config = validate_config(raw, horizon=horizon, seeds=config.seeds)
            for seed in point_config.seeds:
                _, summary = _run_one(point_config, seed)
                rows.append(
                    {
                        "param": param,
                        "value": value,
                        "seed": seed,
                        "horizon": summary["horizon"],
                        "total_regret": summary["total_regret"],
                        "regret_per_unit": summary["regret_per_unit"],
                        "final_exploit_profile": json.dumps(summary["final_exploit_profile"]),
                        "matched_optimal": summary["final_matched_optimal"],
                        "error": "",
                    }
                )
        except Exception as exc:  # keep sweeping past broken points
            traceback.print_exc()
            rows.append(
                {
                    "param": param, "value": value, "seed": "", "horizon": "",
                    "total_regret": "", "regret_per_unit": "",
                    "final_exploit_profile": "", "matched_optimal": "",
                    "error": str(exc),
                }
            )
    path = os.path.join(out, "sweep.csv")
    with open(path, "w") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def cmd_chain_analyze(args):
    config = load_config(args.config)
    oracle = MatchingOracle(config.env)
    solution = oracle.solve()
    report = chain_mod.stability_report(
        config.env, solution, args.eps_grid, config.schedule.exp_c, p_eps=args.p_eps
    )
    space = chain_mod.enumerate_states(config.env)
    kernel0 = chain_mod.build_kernel(space, 0.0, config.schedule.exp_c)
    classes = chain_mod.recurrence_classes(kernel0)
    print(f"state space: {report['n_states']} states")
    print(f"unperturbed recurrence classes: {len(classes)}")
    for members in classes:
        sample = space.decode(members[0])
        all_discontent = all(
            mood == "D" for idx in members for _, _, mood in space.decode(idx)
        )
        kind = "all-discontent" if all_discontent else f"aligned {sample}"
        print(f"  size {len(members):4d}  {kind}")
    print("eps    pi(optimal)  pi(aligned)  pi(discontent)  max other aligned")
    for row in report["rows"]:
        print(
            f"{row['eps']:<6g} {row['pi_optimal']:<12.6f} "
            f"{row['pi_aligned_total']:<12.6f} {row['pi_discontent']:<15.6f} "
            f"{row['max_other_aligned']:.6f}"
        )
    print(f"majority on optimal achieved on grid: {report['majority_achieved']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "stability.csv")
        with open(path, "w") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "eps", "pi_optimal", "pi_aligned_total",
                    "pi_discontent", "max_other_aligned",
                ],
                lineterminator="\n",
            )
            writer.writeheader()
            writer.writerows(report["rows"])
        with open(os.path.join(args.out, "recurrence_classes.txt"), "w") as fh:
            for members in classes:
                fh.write(f"class size {len(members)}:\n")
                for idx in members:
                    fh.write(f"  {space.decode(idx)}\n")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "oracle": cmd_oracle,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "chain-analyze": cmd_chain_analyze,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for err in exc.errors:
            print(f"  error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
