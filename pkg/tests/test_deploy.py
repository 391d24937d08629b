import math

import numpy as np
import pytest

from risconnect.channel import channel_quality, sample_realization, uav_snr_matrix
from risconnect.deploy import (
    PENALTY,
    Landscape,
    SAParams,
    anneal,
    direct_snr_table,
    neighbor,
    objective,
    sa_optimize,
    write_trace_csv,
)
from risconnect.graph import add_ris_edges, algebraic_connectivity, build_graph, laplacian
from risconnect.partition import solve_partition
from risconnect.scenario import Box, default_scenario, make_rng

from landscapes import grid_restricted

FAST = SAParams(iterations_per_temperature=10, cooling_factor=0.85, restarts=1, probes=20)


@pytest.fixture(scope="module")
def cfg():
    return default_scenario()


@pytest.fixture(scope="module")
def one_draw(cfg):
    return sample_realization(cfg, cfg.ris_position, make_rng(40))


@pytest.fixture(scope="module")
def batch(cfg):
    return sample_realization(cfg, cfg.ris_position, make_rng(41), 16)


def graph_for(cfg, r):
    return build_graph(cfg, direct_snr_table(cfg, r), uav_snr_matrix(cfg))


# -- params ------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"cooling_factor": 1.0},
        {"cooling_factor": 0.0},
        {"step_scale": 0.0},
        {"restarts": -1},
        {"initial_temperature": -1.0},
        {"bounds": Box((0, 0, -1), (1, 1, 1))},
    ],
)
def test_params_validated(kw):
    with pytest.raises(ValueError):
        SAParams(**kw)


# -- objective ---------------------------------------------------------------


def test_objective_far_is_penalised(cfg, one_draw):
    g = graph_for(cfg, one_draw)
    assert objective(cfg, g, (100_000, 0, 120), one_draw) < -PENALTY


def test_objective_prefers_baseline_location(cfg, batch):
    near = objective(cfg, None, (0, 0, 120), batch)
    far = objective(cfg, None, (-5000, -5000, 120), batch)
    assert near > far


def test_objective_equals_lambda2_with_ris_edges(cfg, one_draw):
    g = graph_for(cfg, one_draw)
    alpha = cfg.ris_position
    sol = solve_partition(cfg, alpha, one_draw)
    assert sol.feasible
    expected = algebraic_connectivity(laplacian(add_ris_edges(g, sol.uavs, sol.snrs)))
    assert objective(cfg, g, alpha, one_draw) == pytest.approx(expected, rel=1e-12)
    # building the RIS-free graph internally gives the same score
    assert objective(cfg, None, alpha, one_draw) == pytest.approx(expected, rel=1e-12)


def test_snr_sum_mode(cfg, one_draw):
    sol = solve_partition(cfg, cfg.ris_position, one_draw)
    got = objective(cfg, None, cfg.ris_position, one_draw, mode="snr-sum")
    assert got == pytest.approx(sol.snrs.sum())
    with pytest.raises(ValueError):
        objective(cfg, None, cfg.ris_position, one_draw, mode="median")


def test_landscape_mean_of_scores(cfg, batch):
    land = Landscape(cfg, batch)
    s = land.scores((100, 50, 150))
    assert s.shape == (16,)
    assert land((100, 50, 150)) == pytest.approx(s.mean())
    assert np.allclose(channel_quality(batch), land.q)


# -- neighbor ----------------------------------------------------------------


def test_neighbor_zero_temperature(cfg):
    p = SAParams(initial_temperature=1.0)
    x = neighbor((10, 20, 30), 1e-12, p, make_rng(0))
    np.testing.assert_allclose(x, (10, 20, 30), atol=1e-9)


def test_neighbor_reflects_into_bounds():
    p = SAParams(initial_temperature=1.0, step_scale=800.0, bounds=Box((0, 0, 0), (100, 100, 50)))
    rng = make_rng(1)
    box = p.bounds
    x = np.array([50.0, 50.0, 25.0])
    for _ in range(100_000 // 10):
        for _ in range(10):
            x = neighbor(x, 1.0, p, rng)
        assert box.contains(x)


def test_neighbor_step_moments():
    # folded-normal oracle: E|N(0, s^2)| = s sqrt(2/pi); 3D norm is chi(3): 2 s sqrt(2/pi)
    p = SAParams(initial_temperature=2.0, step_scale=50.0)
    rng = make_rng(2)
    steps = np.array([neighbor((0, 0, 250), 2.0, p, rng) for _ in range(100_000)]) - (0, 0, 250)
    per_axis = np.abs(steps).mean(axis=0)
    np.testing.assert_allclose(per_axis, 50 * math.sqrt(2 / math.pi), rtol=0.05)
    assert np.linalg.norm(steps, axis=1).mean() == pytest.approx(100 * math.sqrt(2 / math.pi), rel=0.05)


def test_neighbor_scales_with_temperature():
    p = SAParams(initial_temperature=4.0, step_scale=50.0)
    rng = make_rng(3)
    half = np.array([neighbor((0, 0, 250), 2.0, p, rng) for _ in range(20_000)]) - (0, 0, 250)
    assert np.abs(half).mean() == pytest.approx(25 * math.sqrt(2 / math.pi), rel=0.05)


# -- annealing ---------------------------------------------------------------


def test_zero_iterations_returns_start(cfg, batch):
    p = SAParams(iterations_per_temperature=0, restarts=0, initial_temperature=1.0)
    res = sa_optimize(cfg, None, p, make_rng(4), realization=batch)
    assert tuple(res.position) == tuple(cfg.ris_position)
    assert res.objective == res.initial_objective
    assert res.trace == ()


@pytest.fixture(scope="module")
def fast_runs(cfg, batch):
    return [sa_optimize(cfg, None, FAST, make_rng(50 + s), realization=batch) for s in range(4)]


def test_final_not_worse_than_initial(fast_runs):
    for res in fast_runs:
        assert res.objective >= res.initial_objective


def test_trace_invariants(fast_runs):
    box = FAST.bounds
    for res in fast_runs:
        assert res.trace
        running = {}
        for row in res.trace:
            assert box.contains((row.x, row.y, row.z))
            assert row.best >= running.get(row.chain, -math.inf)
            running[row.chain] = row.best
        assert res.objective == pytest.approx(max(max(running.values()), res.initial_objective))


def test_acceptance_rule_audited(cfg, batch):
    land = Landscape(cfg, batch)
    _, _, f0, trace = anneal(land, tuple(cfg.ris_position), FAST, make_rng(60))
    cur = f0  # chain 0 starts at the given point
    n_worse = 0
    for row in (r for r in trace if r.chain == 0):
        delta = row.objective - cur
        if delta >= 0:
            assert row.accepted and math.isnan(row.draw)
        else:
            n_worse += 1
            assert row.accepted == (row.draw < math.exp(delta / row.temperature))
        if row.accepted:
            cur = row.objective
    assert n_worse > 0


def test_seed_determinism(cfg, batch):
    a = sa_optimize(cfg, None, FAST, make_rng(70), realization=batch)
    b = sa_optimize(cfg, None, FAST, make_rng(70), realization=batch)
    assert a.trace == b.trace
    assert a.position == b.position


def test_thread_count_does_not_change_result(cfg, batch, monkeypatch):
    monkeypatch.setenv("RIS_CONNECT_THREADS", "1")
    a = sa_optimize(cfg, None, FAST, make_rng(71), realization=batch)
    monkeypatch.setenv("RIS_CONNECT_THREADS", "4")
    b = sa_optimize(cfg, None, FAST, make_rng(71), realization=batch)
    assert a.trace == b.trace


def test_result_fields(fast_runs):
    res = fast_runs[0]
    assert FAST.bounds.contains(res.position)
    assert res.mode == "lambda2"
    assert res.snr_sum == pytest.approx(np.mean(res.partition.snrs.sum(axis=-1)))


def test_three_point_toy_landscape():
    # each point of the box scores the value of its nearest anchor
    anchors = [(100.0, 100.0, 50.0), (800.0, 200.0, 300.0), (500.0, 900.0, 150.0)]
    values = [1.0, 3.0, 2.0]

    def score(x):
        d = [math.dist(x, a) for a in anchors]
        return values[d.index(min(d))]

    p = SAParams(bounds=Box((0, 0, 0), (1000, 1000, 400)))
    hits = sum(
        anneal(score, anchors[0], p, make_rng(seed))[1] == max(values) for seed in range(100)
    )
    assert hits >= 95


def test_oracle_proximity_on_grid(cfg):
    r = sample_realization(cfg, cfg.ris_position, make_rng(99), 16)
    lo, hi = (-100.0, -100.0, 0.0), (600.0, 600.0, 400.0)
    score, best = grid_restricted(Landscape(cfg, r), lo, hi, (20, 20, 5))
    p = SAParams(bounds=Box(lo, hi))
    for seed in range(10):
        _, fx, _, _ = anneal(score, tuple(cfg.ris_position), p, make_rng(seed))
        assert fx >= best - 0.02 * abs(best)
        assert fx <= best + 1e-12


def test_trace_csv(fast_runs, tmp_path):
    p = tmp_path / "trace.csv"
    write_trace_csv(fast_runs[0].trace, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "chain,iteration,T,x,y,z,objective,accepted,draw,best"
    assert len(lines) == len(fast_runs[0].trace) + 1
