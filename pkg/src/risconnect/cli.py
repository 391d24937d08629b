"""``ris-connect`` command line entry point.

Exit codes: 0 on success, 2 on a configuration error, 3 when every point of
a campaign is infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channel import sample_realization
from .deploy import SAParams, sa_optimize, write_trace_csv
from .experiments import (
    ALL_SCHEMES,
    ExperimentResult,
    Scheme,
    emit,
    run_connectivity_vs_K,
    run_connectivity_vs_N,
    run_fig2,
    run_rate_vs_gamma0,
    run_rate_vs_zeta,
)
from .partition import solve_partition
from .scenario import ConfigError, ScenarioConfig, default_scenario, load_scenario, make_rng

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _schemes(text: str) -> list[Scheme]:
    return [Scheme(v.strip()) for v in text.split(",") if v.strip()]


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they only override when given
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=d(None), help="TOML scenario document")
    common.add_argument("--seed", type=int, default=d(None), help="override the scenario rng_seed")
    common.add_argument("--trials", type=int, default=d(None), help="Monte-Carlo trials per sweep point")
    common.add_argument("--out", type=Path, default=d(None), help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    common.add_argument("--objective", choices=("lambda2", "snr-sum"), default=d("lambda2"))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(suppress=True)
    p = argparse.ArgumentParser(
        prog="ris-connect", description=__doc__.splitlines()[0], parents=[_common_flags(False)]
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fig2", parents=[common], help="exact vs approximated rates")
    s.add_argument("--rho-grid", type=_floats, default=[i / 10 for i in range(11)])
    s.add_argument("--n-grid", type=_ints, default=[20, 40, 60, 80, 100, 150, 200])
    s.add_argument("--sweep", choices=("rho", "n"), default="rho")

    schemes = ",".join(s.value for s in ALL_SCHEMES)
    s = sub.add_parser("vs-k", parents=[common], help="connectivity versus number of UAVs")
    s.add_argument("--k-values", type=_ints, default=list(range(2, 15, 2)))
    s.add_argument("--schemes", type=_schemes, default=list(ALL_SCHEMES), help=schemes)

    s = sub.add_parser("vs-n", parents=[common], help="connectivity versus RIS size")
    s.add_argument("--n-values", type=_ints, default=[20, 40, 80, 120, 160, 200])
    s.add_argument("--schemes", type=_schemes, default=list(ALL_SCHEMES), help=schemes)

    s = sub.add_parser("vs-zeta", parents=[common], help="rates and shares versus zeta")
    s.add_argument("--zeta-values", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5])

    s = sub.add_parser("vs-gamma0", parents=[common], help="rates and shares versus gamma0")
    s.add_argument("--gamma-values", type=_floats, default=[60, 62.5, 65, 67.5, 70, 72.5, 75])
    s.add_argument("--zeta", type=float, default=0.1)

    s = sub.add_parser("deploy", parents=[common], help="anneal the RIS position")
    s.add_argument("--trace", type=Path, help="write the annealing trace as CSV")

    sub.add_parser("partition", parents=[common], help="closed-form partition at the configured RIS")
    return p


def _load_config(args) -> ScenarioConfig:
    if args.config is None:
        cfg = default_scenario()
    else:
        try:
            text = args.config.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read {args.config}: {e}") from None
        cfg = load_scenario(text)
    if args.seed is not None:
        cfg = cfg.with_(rng_seed=args.seed)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be positive", key="mc_trials")
        cfg = cfg.with_(mc_trials=args.trials)
    return cfg


def _all_infeasible(result: ExperimentResult) -> bool:
    if "feasible" in result.series:
        return all(v == 0 for v in result.series["feasible"])
    fractions = [v for point in result.meta.get("feasible", []) for v in point.values()]
    return bool(fractions) and all(v == 0 for v in fractions)


def _write_json(obj, args) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as e:
        print(f"ris-connect: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _dispatch(args, cfg)
    except ValueError as e:
        # bad sweep values or an inapplicable scheme for this scenario
        print(f"ris-connect: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args, cfg: ScenarioConfig) -> int:
    cmd = args.command
    if cmd == "fig2":
        by_rho, by_n = run_fig2(cfg, args.rho_grid, args.n_grid)
        result = by_rho if args.sweep == "rho" else by_n
    elif cmd == "vs-k":
        result = run_connectivity_vs_K(cfg, args.k_values, args.schemes, mode=args.objective)
    elif cmd == "vs-n":
        result = run_connectivity_vs_N(cfg, args.n_values, args.schemes, mode=args.objective)
    elif cmd == "vs-zeta":
        result = run_rate_vs_zeta(cfg, args.zeta_values)
    elif cmd == "vs-gamma0":
        result = run_rate_vs_gamma0(cfg, args.gamma_values, zeta=args.zeta)
    elif cmd == "deploy":
        dep = sa_optimize(cfg, None, SAParams(), make_rng(cfg.rng_seed, 5), mode=args.objective)
        if args.trace is not None:
            write_trace_csv(dep.trace, args.trace)
        _write_json({
            "position": list(dep.position),
            "objective": dep.objective,
            "initial_objective": dep.initial_objective,
            "snr_sum": dep.snr_sum,
            "objective_mode": dep.mode,
            "mean_shares": np.mean(dep.partition.shares, axis=0).tolist(),
            "feasible_fraction": float(np.mean(dep.partition.feasible)),
        }, args)
        return 0 if np.any(dep.partition.feasible) else EXIT_INFEASIBLE
    else:  # partition
        r = sample_realization(cfg, cfg.ris_position, make_rng(cfg.rng_seed, 6))
        sol = solve_partition(cfg, cfg.ris_position, r)
        _write_json({
            "uavs": list(sol.uavs),
            "shares": sol.shares.tolist(),
            "element_counts": sol.element_counts.tolist(),
            "snrs": sol.snrs.tolist(),
            "verdict": sol.verdict.tag,
        }, args)
        return 0 if sol.feasible else EXIT_INFEASIBLE

    emit(result, args.format, args.out)
    return EXIT_INFEASIBLE if _all_infeasible(result) else 0


if __name__ == "__main__":
    sys.exit(main())
