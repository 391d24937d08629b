"""RIS placement by simulated annealing.

Candidate positions are scored on a frozen batch of channel realizations
(common random numbers), so the chain never chases fading noise.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import (
    ChannelRealization,
    channel_quality,
    sample_realization,
    snr_direct,
    uav_snr_matrix,
)
from .graph import (
    NetworkGraph,
    UE_NODE,
    algebraic_connectivity,
    build_weight_matrices,
    laplacian,
    laplacian_from_weights,
    snr_weight,
    uav_node,
)
from .partition import PartitionSolution, solve_partition_q
from .scenario import Box, Position3D, ScenarioConfig

__all__ = [
    "SAParams",
    "TraceRow",
    "DeploymentResult",
    "Landscape",
    "PENALTY",
    "objective",
    "neighbor",
    "anneal",
    "sa_optimize",
    "direct_snr_table",
    "write_trace_csv",
]

PENALTY = 1e6
OBJECTIVE_MODES = ("lambda2", "snr-sum")
DEFAULT_BOUNDS = Box((-2000.0, -2000.0, 0.0), (2000.0, 2000.0, 500.0))


@dataclass(frozen=True)
class SAParams:
    """Annealing schedule.

    ``initial_temperature=None`` picks the interquartile range of the
    objective over ``probes`` random positions; ``temperature_floor=None``
    means ``1e-4`` times the initial temperature. ``restarts`` counts chains
    beyond the first.
    """

    initial_temperature: float | None = None
    cooling_factor: float = 0.95
    iterations_per_temperature: int = 40
    temperature_floor: float | None = None
    step_scale: float = 50.0
    bounds: Box = DEFAULT_BOUNDS
    restarts: int = 3
    batch_size: int = 16
    probes: int = 50

    def __post_init__(self):
        if not 0.0 < self.cooling_factor < 1.0:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.iterations_per_temperature < 0 or self.restarts < 0:
            raise ValueError("iteration and restart counts must be nonnegative")
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise ValueError("initial_temperature must be positive")
        if self.temperature_floor is not None and self.temperature_floor <= 0:
            raise ValueError("temperature_floor must be positive")
        if self.bounds.lo[2] < 0:
            raise ValueError("RIS altitude lower bound must be >= 0")


@dataclass(frozen=True)
class TraceRow:
    chain: int
    iteration: int
    temperature: float
    x: float
    y: float
    z: float
    objective: float
    accepted: bool
    draw: float  # uniform draw for a worsening move, NaN otherwise
    best: float


@dataclass(frozen=True)
class DeploymentResult:
    position: Position3D
    partition: PartitionSolution
    objective: float
    snr_sum: float
    initial_objective: float
    mode: str
    trace: tuple[TraceRow, ...] = field(repr=False, default=())


def direct_snr_table(config: ScenarioConfig, realization: ChannelRealization) -> np.ndarray:
    """Linear UE->UAV SNRs ``(..., K)``; blocked UAVs are reported as 0."""
    out = np.zeros(realization.direct_amp.shape)
    for k in range(config.n_uavs):
        if k not in config.blocked_uavs:
            out[..., k] = snr_direct(config, k, realization)
    return out


class Landscape:
    """Scores RIS positions on a fixed realization batch.

    The base (RIS-free) Laplacians and the cascade sums do not depend on the
    RIS position, so they are computed once here.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        realization: ChannelRealization,
        uavs: Sequence[int] | None = None,
        graph: NetworkGraph | None = None,
        mode: str = "lambda2",
        zetas: Sequence[float] | None = None,
    ):
        if mode not in OBJECTIVE_MODES:
            raise ValueError(f"objective mode must be one of {OBJECTIVE_MODES}")
        self.config = config
        self.uavs = tuple(config.blocked_uavs if uavs is None else uavs)
        self.zetas = zetas
        self.mode = mode
        cols = [config.blocked_uavs.index(u) for u in self.uavs]
        self.q = np.atleast_2d(channel_quality(realization)[..., cols])
        if graph is not None:
            base = np.broadcast_to(laplacian(graph), (len(self.q),) + (graph.n_nodes,) * 2)
        else:
            direct = np.atleast_2d(direct_snr_table(config, realization))
            w = build_weight_matrices(config, direct, uav_snr_matrix(config))
            base = laplacian_from_weights(w)
        self.base = np.array(base)
        self._nodes = [uav_node(u) for u in self.uavs]

    def partition(self, alpha) -> PartitionSolution:
        return solve_partition_q(self.config, alpha, self.q, self.uavs, self.zetas)

    def scores(self, alpha) -> np.ndarray:
        """Per-realization scores at ``alpha``."""
        sol = self.partition(alpha)
        feasible = sol.verdict.feasible
        if self.mode == "snr-sum":
            good = sol.snrs.sum(axis=-1)
        else:
            lap = self.base.copy()
            w = snr_weight(sol.snrs)
            for i, node in enumerate(self._nodes):
                lap[:, UE_NODE, UE_NODE] += w[:, i]
                lap[:, node, node] += w[:, i]
                lap[:, UE_NODE, node] -= w[:, i]
                lap[:, node, UE_NODE] -= w[:, i]
            good = algebraic_connectivity(lap, check=False)
        return np.where(feasible, good, -(PENALTY + sol.verdict.violation))

    def __call__(self, alpha) -> float:
        return float(np.mean(self.scores(alpha)))


def objective(
    config: ScenarioConfig,
    graph: NetworkGraph | None,
    alpha,
    realization: ChannelRealization,
    uavs: Sequence[int] | None = None,
    mode: str = "lambda2",
) -> float:
    """Fitness of RIS position ``alpha``, averaged over the realization batch.

    Feasible draws score ``lambda2`` of the graph with the RIS edges added
    (or the SNR sum in ``"snr-sum"`` mode); infeasible draws score
    ``-(PENALTY + violation)``. With ``graph=None`` the RIS-free graph is
    built from each realization's direct fading.
    """
    return Landscape(config, realization, uavs, graph, mode)(alpha)


def _reflect(x, lo, hi) -> np.ndarray:
    # scalar loop: for three coordinates this beats the vectorised form
    out = np.empty(3)
    for i in range(3):
        a, b = lo[i], hi[i]
        span = b - a
        if span <= 0:
            out[i] = a
            continue
        y = (x[i] - a) % (2.0 * span)
        out[i] = a + (2.0 * span - y if y > span else y)
    return out


def neighbor(alpha, temperature: float, params: SAParams, rng: np.random.Generator,
             initial_temperature: float | None = None) -> np.ndarray:
    """Gaussian step scaled by ``T / T0`` per axis, reflected into the bounds."""
    t0 = initial_temperature or params.initial_temperature or temperature
    sigma = params.step_scale * (temperature / t0) if t0 > 0 else 0.0
    step = rng.normal(0.0, 1.0, 3) * sigma
    x = [float(a) + float(d) for a, d in zip(alpha, step)]
    return _reflect(x, params.bounds.lo, params.bounds.hi)


def _auto_temperature(score: Callable, params: SAParams, rng: np.random.Generator) -> float:
    pts = rng.uniform(params.bounds.lo, params.bounds.hi, size=(params.probes, 3))
    vals = np.array([score(p) for p in pts])
    q75, q25 = np.percentile(vals, [75, 25])
    iqr = float(q75 - q25)
    return iqr if iqr > 0 else 1.0


def _chain(score, x0, f0, t0, floor, params, rng, chain_id):
    cur, fcur = np.array(x0, dtype=float), f0
    best, fbest = cur.copy(), fcur
    trace = []
    it = 0
    t = t0
    while t >= floor and params.iterations_per_temperature > 0:
        for _ in range(params.iterations_per_temperature):
            cand = neighbor(cur, t, params, rng, initial_temperature=t0)
            fc = score(cand)
            delta = fc - fcur
            if delta >= 0:
                accept, draw = True, math.nan
            else:
                draw = float(rng.random())
                accept = draw < math.exp(delta / t)
            if accept:
                cur, fcur = cand, fc
                if fc > fbest:
                    best, fbest = cand.copy(), fc
            trace.append(TraceRow(chain_id, it, t, *map(float, cand), fc, accept, draw, fbest))
            it += 1
        t *= params.cooling_factor
    return best, fbest, trace


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RIS_CONNECT_THREADS", "1")))
    except ValueError:
        return 1


def anneal(score: Callable, x0, params: SAParams, rng: np.random.Generator):
    """Maximise ``score`` over ``params.bounds`` starting from ``x0``.

    Chain 0 starts at ``x0``; every restart starts uniformly at random. Each
    chain has its own child generator, so results do not depend on how the
    chains are scheduled. Returns ``(best_x, best_score, initial_score, trace)``.
    """
    x0 = params.bounds.clip(x0)
    f0 = score(x0)
    t0 = params.initial_temperature or _auto_temperature(score, params, rng)
    floor = params.temperature_floor or t0 * 1e-4
    n_chains = 1 + params.restarts
    rngs = rng.spawn(n_chains)
    starts = [(x0, f0)]
    for r in rngs[1:]:
        s = r.uniform(params.bounds.lo, params.bounds.hi)
        starts.append((s, score(s)))

    def run(i):
        x, f = starts[i]
        return _chain(score, x, f, t0, floor, params, rngs[i], i)

    workers = min(_threads(), n_chains)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(n_chains)))
    else:
        results = [run(i) for i in range(n_chains)]

    best_x, best_f = x0, f0
    trace: list[TraceRow] = []
    for x, f, tr in results:
        trace.extend(tr)
        if f > best_f:
            best_x, best_f = x, f
    return best_x, best_f, f0, tuple(trace)


def sa_optimize(
    config: ScenarioConfig,
    graph: NetworkGraph | None = None,
    params: SAParams | None = None,
    rng: np.random.Generator | None = None,
    *,
    realization: ChannelRealization | None = None,
    uavs: Sequence[int] | None = None,
    start=None,
    mode: str = "lambda2",
    zetas: Sequence[float] | None = None,
) -> DeploymentResult:
    """Place the RIS to maximise connectivity with the closed-form partition.

    Without ``realization`` a batch of ``params.batch_size`` draws is
    sampled from ``rng`` and frozen for the whole run. ``start`` defaults to
    the configured RIS position.
    """
    params = params or SAParams()
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    if realization is None:
        realization = sample_realization(config, config.ris_position, rng, params.batch_size)
    land = Landscape(config, realization, uavs, graph, mode, zetas)
    x0 = config.ris_position if start is None else start
    best_x, best_f, f0, trace = anneal(land, tuple(x0), params, rng)
    sol = land.partition(best_x)
    return DeploymentResult(
        position=Position3D(*best_x),
        partition=sol,
        objective=best_f,
        snr_sum=float(np.mean(sol.snrs.sum(axis=-1))),
        initial_objective=f0,
        mode=mode,
        trace=trace,
    )


def write_trace_csv(trace: Sequence[TraceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iteration", "T", "x", "y", "z", "objective", "accepted", "draw", "best"])
        for r in trace:
            w.writerow([
                r.chain, r.iteration, f"{r.temperature:.12g}", f"{r.x:.12g}", f"{r.y:.12g}",
                f"{r.z:.12g}", f"{r.objective:.12g}", int(r.accepted), f"{r.draw:.12g}",
                f"{r.best:.12g}",
            ])
