"""Benchmark schemes and the Monte-Carlo campaigns behind the figures.

Every campaign draws one realization batch per sweep point and evaluates
all schemes on it (common random numbers), so per-trial comparisons
between schemes are meaningful.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import permutations
from typing import IO, Iterable, Sequence

import numpy as np

from .channel import (
    ChannelRealization,
    cascade_gain,
    channel_quality,
    optimal_phases,
    partition_assignment,
    quantize_phases,
    rate,
    sample_realization,
    snr_approx,
    snr_exact,
    uav_snr_matrix,
)
from .deploy import DeploymentResult, SAParams, direct_snr_table, sa_optimize
from .graph import (
    UE_NODE,
    algebraic_connectivity,
    build_weight_matrices,
    laplacian_from_weights,
    snr_weight,
    uav_node,
)
from .partition import solve_partition_q
from .scenario import ScenarioConfig, make_rng

__all__ = [
    "ALL_SCHEMES",
    "Scheme",
    "SchemeNotApplicable",
    "ExperimentResult",
    "evaluate_schemes",
    "run_scheme",
    "run_fig2",
    "run_connectivity_vs_K",
    "run_connectivity_vs_N",
    "run_rate_vs_zeta",
    "run_rate_vs_gamma0",
    "emit",
    "load_result",
]


class Scheme(str, Enum):
    PROPOSED = "Proposed"
    PROPOSED_OPTIMAL = "ProposedOptimal"
    ONE_LINK = "OneLink"
    ONE_LINK_OPTIMAL = "OneLinkOptimal"
    PROPOSED_RANDOM_RIS = "ProposedRandomRIS"
    RIS_FREE = "RisFree"
    RIS_FREE_NO_DIRECT = "RisFreeNoDirect"


ALL_SCHEMES = tuple(Scheme)
_PAIR_SCHEMES = {Scheme.PROPOSED, Scheme.PROPOSED_OPTIMAL, Scheme.PROPOSED_RANDOM_RIS}
_RIS_SCHEMES = _PAIR_SCHEMES | {Scheme.ONE_LINK, Scheme.ONE_LINK_OPTIMAL}


class SchemeNotApplicable(ValueError):
    pass


@dataclass
class ExperimentResult:
    """Mean and standard error of each series at each sweep value."""

    name: str
    sweep_name: str
    sweep_values: list
    series: dict[str, list[float]]
    stderr: dict[str, list[float]]
    trials: int
    seed: int
    config: dict
    meta: dict = field(default_factory=dict)


def _mean_se(x: np.ndarray, mask: np.ndarray | None = None) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if mask is not None:
        x = x[mask]
    if x.size == 0:
        return math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def _check_applicable(config: ScenarioConfig, scheme: Scheme) -> None:
    nb = len(config.blocked_uavs)
    if scheme in _PAIR_SCHEMES and nb < 2:
        raise SchemeNotApplicable(f"{scheme.value} needs at least two blocked UAVs")
    if scheme in _RIS_SCHEMES and nb < 1:
        raise SchemeNotApplicable(f"{scheme.value} needs a blocked UAV")


def _with_ris_edges(base_lap: np.ndarray, uavs: Sequence[int], snrs: np.ndarray, mask) -> np.ndarray:
    """Add UE->UAV RIS edges on the trials where ``mask`` holds."""
    lap = base_lap.copy()
    w = np.where(np.asarray(mask)[..., None], snr_weight(snrs), 0.0)
    for i, k in enumerate(uavs):
        node = uav_node(k)
        lap[..., UE_NODE, UE_NODE] += w[..., i]
        lap[..., node, node] += w[..., i]
        lap[..., UE_NODE, node] -= w[..., i]
        lap[..., node, UE_NODE] -= w[..., i]
    return lap


def evaluate_schemes(
    config: ScenarioConfig,
    schemes: Iterable[Scheme] = ALL_SCHEMES,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    sa_params: SAParams | None = None,
    mode: str = "lambda2",
    realization: ChannelRealization | None = None,
    sa_batch: ChannelRealization | None = None,
    starts: dict | None = None,
) -> tuple[dict[Scheme, np.ndarray], dict]:
    """Per-trial algebraic connectivity of each scheme on one realization batch.

    The RIS is placed once per target pair by annealing on a separate frozen
    batch (``sa_batch``) and then evaluated on every trial. A trial whose
    partition is infeasible gets no RIS edge, so it scores as RIS-free.
    ``starts`` maps a target pair to the annealer's starting position.

    Returns ``(lambda2 per scheme, info)``; ``info`` holds the deployments
    used and the fraction of feasible trials per RIS scheme.
    """
    schemes = [Scheme(s) for s in schemes]
    for s in schemes:
        _check_applicable(config, s)
    rng = rng if rng is not None else make_rng(config.rng_seed)
    sa_params = sa_params or SAParams()
    eval_rng, batch_rng, sa_rng = rng.spawn(3)
    if realization is None:
        realization = sample_realization(
            config, config.ris_position, eval_rng, trials or config.mc_trials
        )
    if sa_batch is None and schemes and set(schemes) & (_RIS_SCHEMES - {Scheme.PROPOSED_RANDOM_RIS}):
        sa_batch = sample_realization(config, config.ris_position, batch_rng, sa_params.batch_size)
    starts = starts or {}

    uav_table = uav_snr_matrix(config)
    direct = direct_snr_table(config, realization)
    base = laplacian_from_weights(build_weight_matrices(config, direct, uav_table))
    q_all = channel_quality(realization)
    blocked = config.blocked_uavs

    deployments: dict[tuple[int, ...], DeploymentResult] = {}
    pair_list = list(permutations(blocked, 2))
    pair_rngs = dict(zip(pair_list, sa_rng.spawn(len(pair_list)))) if pair_list else {}

    def deploy(pair):
        if pair not in deployments:
            deployments[pair] = sa_optimize(
                config, None, sa_params, pair_rngs[pair],
                realization=sa_batch, uavs=pair, start=starts.get(pair), mode=mode,
            )
        return deployments[pair]

    def pair_lambda(pair, alpha):
        cols = [blocked.index(u) for u in pair]
        sol = solve_partition_q(config, alpha, q_all[..., cols], pair)
        feas = sol.verdict.feasible
        return algebraic_connectivity(_with_ris_edges(base, pair, sol.snrs, feas), check=False), feas

    def one_link_lambda(uav, alpha):
        col = blocked.index(uav)
        snr = cascade_gain(config, alpha, uav) * q_all[..., col] ** 2
        feas = snr >= config.thr_ris_lin
        lap = _with_ris_edges(base, [uav], snr[..., None], feas)
        return algebraic_connectivity(lap, check=False), feas

    declared = tuple(blocked[:2])
    out: dict[Scheme, np.ndarray] = {}
    feasible: dict[str, float] = {}
    for s in schemes:
        if s is Scheme.RIS_FREE:
            out[s] = algebraic_connectivity(base, check=False)
        elif s is Scheme.RIS_FREE_NO_DIRECT:
            w = build_weight_matrices(config, direct, uav_table, drop_ue=True)
            out[s] = algebraic_connectivity(laplacian_from_weights(w), check=False)
        elif s is Scheme.PROPOSED:
            out[s], f = pair_lambda(declared, deploy(declared).position)
            feasible[s.value] = float(np.mean(f))
        elif s is Scheme.PROPOSED_RANDOM_RIS:
            out[s], f = pair_lambda(declared, config.ris_position)
            feasible[s.value] = float(np.mean(f))
        elif s is Scheme.PROPOSED_OPTIMAL:
            runs = [pair_lambda(p, deploy(p).position) for p in pair_list]
            out[s] = np.max([r[0] for r in runs], axis=0)
            feasible[s.value] = float(np.mean(np.any([r[1] for r in runs], axis=0)))
        elif s in (Scheme.ONE_LINK, Scheme.ONE_LINK_OPTIMAL):
            # one-link schemes share the deployment of the proposed pair
            if len(blocked) >= 2:
                alpha = deploy(declared).position
            else:
                alpha = config.ris_position
            targets = [blocked[0]] if s is Scheme.ONE_LINK else list(blocked)
            runs = [one_link_lambda(u, alpha) for u in targets]
            out[s] = np.max([r[0] for r in runs], axis=0)
            feasible[s.value] = float(np.mean(np.any([r[1] for r in runs], axis=0)))
    info = {
        "deployments": {p: d for p, d in deployments.items()},
        "feasible": feasible,
    }
    return out, info


def run_scheme(
    config: ScenarioConfig,
    scheme: Scheme,
    rng: np.random.Generator,
    sa_params: SAParams | None = None,
    mode: str = "lambda2",
) -> float:
    """Algebraic connectivity of one scheme on a single channel draw."""
    scheme = Scheme(scheme)
    res, _ = evaluate_schemes(config, [scheme], 1, rng, sa_params, mode)
    return float(res[scheme][0])


def _campaign_result(name, sweep_name, values, per_point, trials, seed, config, meta):
    series: dict[str, list[float]] = {}
    stderr: dict[str, list[float]] = {}
    for point in per_point:
        for key, (m, se) in point.items():
            series.setdefault(key, []).append(m)
            stderr.setdefault(key, []).append(se)
    return ExperimentResult(
        name=name,
        sweep_name=sweep_name,
        sweep_values=list(values),
        series=series,
        stderr=stderr,
        trials=trials,
        seed=seed,
        config=config.to_dict(),
        meta=meta,
    )


def _deployment_meta(info) -> dict:
    return {
        "-".join(map(str, p)): list(d.position) for p, d in info["deployments"].items()
    }


def run_connectivity_vs_K(
    config: ScenarioConfig,
    k_values: Sequence[int],
    schemes: Sequence[Scheme] = ALL_SCHEMES,
    trials: int | None = None,
    seed: int | None = None,
    sa_params: SAParams | None = None,
    mode: str = "lambda2",
) -> ExperimentResult:
    """Mean algebraic connectivity per scheme versus the number of UAVs.

    The extra UAVs beyond the two blocked ones are nested: the topology at
    ``K`` contains the one at every smaller ``K``.
    """
    if any(not 2 <= k <= 20 for k in k_values):
        raise ValueError("K values must lie in [2, 20]")
    seed = config.rng_seed if seed is None else seed
    trials = trials or config.mc_trials
    schemes = [Scheme(s) for s in schemes]
    points, feas, dep = [], [], []
    for k in k_values:
        cfg = config.with_(n_uavs=k)
        res, info = evaluate_schemes(cfg, schemes, trials, make_rng(seed, 1, k), sa_params, mode)
        points.append({s.value: _mean_se(res[s]) for s in schemes})
        feas.append(info["feasible"])
        dep.append(_deployment_meta(info))
    meta = {"objective": mode, "feasible": feas, "deployments": dep}
    return _campaign_result("connectivity_vs_K", "K", k_values, points, trials, seed, config, meta)


def run_connectivity_vs_N(
    config: ScenarioConfig,
    n_values: Sequence[int],
    schemes: Sequence[Scheme] = ALL_SCHEMES,
    trials: int | None = None,
    seed: int | None = None,
    sa_params: SAParams | None = None,
    mode: str = "lambda2",
) -> ExperimentResult:
    """Mean algebraic connectivity per scheme versus the RIS size.

    Realizations are nested across ``N`` (the first ``N`` elements of one
    large draw) and each annealing run starts from the position found at the
    previous, smaller ``N``.
    """
    if any(n < 1 for n in n_values):
        raise ValueError("N values must be positive")
    seed = config.rng_seed if seed is None else seed
    trials = trials or config.mc_trials
    schemes = [Scheme(s) for s in schemes]
    sa_params = sa_params or SAParams()
    n_max = max(n_values)
    big = config.with_(n_elements=n_max)
    rng = make_rng(seed, 2)
    r_eval = sample_realization(big, big.ris_position, rng, trials)
    r_sa = sample_realization(big, big.ris_position, rng, sa_params.batch_size)

    order = sorted(range(len(n_values)), key=lambda i: n_values[i])
    points: list = [None] * len(n_values)
    feas: list = [None] * len(n_values)
    dep: list = [None] * len(n_values)
    starts: dict = {}
    for i in order:
        n = n_values[i]
        cfg = config.with_(n_elements=n)
        res, info = evaluate_schemes(
            cfg, schemes, trials, make_rng(seed, 2, n), sa_params, mode,
            realization=r_eval.truncate(n), sa_batch=r_sa.truncate(n), starts=starts,
        )
        starts = {p: tuple(d.position) for p, d in info["deployments"].items()}
        points[i] = {s.value: _mean_se(res[s]) for s in schemes}
        feas[i] = info["feasible"]
        dep[i] = _deployment_meta(info)
    meta = {"objective": mode, "feasible": feas, "deployments": dep}
    return _campaign_result("connectivity_vs_N", "N", n_values, points, trials, seed, config, meta)


def run_fig2(
    config: ScenarioConfig,
    rho_grid: Sequence[float],
    n_grid: Sequence[int],
    trials: int | None = None,
    seed: int | None = None,
    rho_for_n: float = 0.8,
) -> tuple[ExperimentResult, ExperimentResult]:
    """Exact versus approximated rates of UAV_x and UAV_y.

    The exact rate uses the full complex sum with ``b``-bit quantized
    phases; the approximation keeps only the aligned term. The first result
    sweeps ``rho_x`` at the configured N, the second sweeps N at
    ``rho_for_n``. Each series is a mean rate in bit/s; ``gap_*`` is the
    mean relative gap ``|exact - approx| / exact``.
    """
    seed = config.rng_seed if seed is None else seed
    trials = trials or config.mc_trials
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(config.blocked_uavs) < 2:
        raise ValueError("rate comparison needs two blocked UAVs")
    x, y = config.blocked_uavs[:2]
    alpha = config.ris_position
    n_max = max(list(n_grid) + [config.n_elements])
    big = config.with_(n_elements=n_max)
    realization = sample_realization(big, alpha, make_rng(seed, 3), trials)

    def point(n, rho_x):
        cfg = config.with_(n_elements=n)
        r = realization.truncate(n)
        assign = partition_assignment([rho_x, 1.0 - rho_x], n)
        prof = quantize_phases(optimal_phases(r, assign), cfg.bit_resolution)
        q = channel_quality(r)
        out = {}
        for name, col, uav, rho in (("x", 0, x, rho_x), ("y", 1, y, 1.0 - rho_x)):
            rho = min(max(rho, 0.0), 1.0)
            exact = rate(snr_exact(cfg, r, prof, col), cfg.bandwidth)
            approx = rate(snr_approx(cfg, alpha, rho, q[..., col], uav), cfg.bandwidth)
            with np.errstate(divide="ignore", invalid="ignore"):
                gap = np.abs(exact - approx) / exact
            out[f"exact_{name}"] = _mean_se(exact)
            out[f"approx_{name}"] = _mean_se(approx)
            out[f"gap_{name}"] = _mean_se(gap, np.isfinite(gap))
        return out

    rho_points = [point(config.n_elements, r) for r in rho_grid]
    n_points = [point(n, rho_for_n) for n in n_grid]
    meta = {"bit_resolution": config.bit_resolution or "infinite"}
    return (
        _campaign_result("fig2_rho", "rho_x", rho_grid, rho_points, trials, seed, config, meta),
        _campaign_result(
            "fig2_n", "N", n_grid, n_points, trials, seed, config, {**meta, "rho_x": rho_for_n}
        ),
    )


def _rate_point(config: ScenarioConfig, q: np.ndarray, zeta: float) -> dict:
    uavs = config.blocked_uavs[:2]
    sol = solve_partition_q(config, config.ris_position, q, uavs, [zeta])
    code = np.asarray(sol.verdict.code)
    # domain/C3 violations (shares above one) have no physical rate
    ok = (code != 1) & (code != 2)
    rates = rate(np.where(ok[..., None], sol.snrs, 0.0), config.bandwidth)
    return {
        "rate_x": _mean_se(rates[..., 0], ok),
        "rate_y": _mean_se(rates[..., 1], ok),
        "rho_x": _mean_se(sol.shares[..., 0]),
        "rho_y": _mean_se(sol.shares[..., 1]),
        "feasible": _mean_se(sol.verdict.feasible.astype(float)),
    }


def _rate_q(config, trials, seed, q_mode):
    r = sample_realization(config, config.ris_position, make_rng(seed, 4), trials)
    cols = [config.blocked_uavs.index(u) for u in config.blocked_uavs[:2]]
    q = channel_quality(r)[..., cols]
    if q_mode == "mean":
        q = np.broadcast_to(q.mean(axis=0), q.shape)
    elif q_mode != "trial":
        raise ValueError(f"unknown q_mode {q_mode!r}")
    return q


def run_rate_vs_zeta(
    config: ScenarioConfig,
    zeta_values: Sequence[float],
    trials: int | None = None,
    seed: int | None = None,
    q_mode: str = "trial",
) -> ExperimentResult:
    """Rates and shares versus the QoS cap at the configured RIS position.

    Rates are averaged over trials whose shares fit in the array;
    ``feasible`` is the fraction of trials meeting every constraint.
    """
    if any(not 0 < z <= 1 for z in zeta_values):
        raise ValueError("zeta values must lie in (0, 1]")
    seed = config.rng_seed if seed is None else seed
    trials = trials or config.mc_trials
    q = _rate_q(config, trials, seed, q_mode)
    points = [_rate_point(config, q, z) for z in zeta_values]
    meta = {"thr_ris_db": config.thr_ris_db, "q_mode": q_mode}
    return _campaign_result("rate_vs_zeta", "zeta", zeta_values, points, trials, seed, config, meta)


def run_rate_vs_gamma0(
    config: ScenarioConfig,
    gamma_values_db: Sequence[float],
    trials: int | None = None,
    seed: int | None = None,
    zeta: float | None = None,
    q_mode: str = "trial",
) -> ExperimentResult:
    """Rates and shares versus the RIS-link SNR threshold (dB)."""
    seed = config.rng_seed if seed is None else seed
    trials = trials or config.mc_trials
    zeta = config.zeta if zeta is None else zeta
    q = _rate_q(config, trials, seed, q_mode)
    points = [_rate_point(config.with_(thr_ris_db=g), q, zeta) for g in gamma_values_db]
    meta = {"zeta": zeta, "q_mode": q_mode}
    return _campaign_result(
        "rate_vs_gamma0", "gamma0_db", gamma_values_db, points, trials, seed, config, meta
    )


# -- output --------------------------------------------------------------------


def _round12(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if not math.isfinite(v) else float(f"{v:.12g}")
    if isinstance(v, dict):
        return {str(k): _round12(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_round12(x) for x in v]
    return v


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _to_dict(result: ExperimentResult) -> dict:
    return _round12({
        "name": result.name,
        "sweep_name": result.sweep_name,
        "sweep_values": result.sweep_values,
        "series": result.series,
        "stderr": result.stderr,
        "trials": result.trials,
        "seed": result.seed,
        "config": result.config,
        "meta": result.meta,
    })


def emit(result: ExperimentResult, format: str = "csv", destination=None) -> None:
    """Write ``result`` as CSV or JSON with numbers at 12 significant digits.

    ``destination`` is a path or a text stream. JSON embeds the config
    snapshot; CSV written to a path gets a ``<path>.meta.json`` sidecar.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")
    if format == "json":
        text = json.dumps(_to_dict(result), indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep", "value", "series", "mean", "stderr", "trials"])
        for i, v in enumerate(result.sweep_values):
            for key in result.series:
                w.writerow([
                    result.sweep_name, _fmt(v), key, _fmt(result.series[key][i]),
                    _fmt(result.stderr[key][i]), result.trials,
                ])
        text = buf.getvalue()

    if destination is None or hasattr(destination, "write"):
        (destination or _stdout()).write(text)
        return
    try:
        with open(destination, "w") as fh:
            fh.write(text)
        if format == "csv":
            meta = _to_dict(result)
            del meta["series"], meta["stderr"]
            with open(f"{destination}.meta.json", "w") as fh:
                fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise OSError(f"cannot write results to {destination}: {e}") from e


def _stdout() -> IO[str]:
    import sys

    return sys.stdout


def load_result(path) -> ExperimentResult:
    """Read back a JSON file written by :func:`emit`."""
    with open(path) as fh:
        d = json.load(fh)
    return ExperimentResult(**d)
