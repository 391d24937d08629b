import io
import json
import math

import numpy as np
import pytest

from risconnect.channel import channel_quality, sample_realization, snr_approx
from risconnect.deploy import SAParams
from risconnect.experiments import (
    ALL_SCHEMES,
    ExperimentResult,
    Scheme,
    SchemeNotApplicable,
    emit,
    evaluate_schemes,
    load_result,
    run_connectivity_vs_K,
    run_connectivity_vs_N,
    run_fig2,
    run_rate_vs_gamma0,
    run_rate_vs_zeta,
    run_scheme,
)
from risconnect.scenario import default_scenario, make_rng

FAST = SAParams(iterations_per_temperature=10, cooling_factor=0.85, restarts=1, probes=20)
S = Scheme


@pytest.fixture(scope="module")
def cfg():
    return default_scenario()


@pytest.fixture(scope="module")
def k8(cfg):
    return evaluate_schemes(cfg, ALL_SCHEMES, 300, make_rng(1), FAST)


# -- schemes -------------------------------------------------------------------


def test_no_direct_is_zero(k8):
    res, _ = k8
    assert np.all(res[S.RIS_FREE_NO_DIRECT] == 0)


@pytest.mark.parametrize(
    "hi,lo",
    [
        (S.PROPOSED_OPTIMAL, S.PROPOSED),
        (S.PROPOSED_OPTIMAL, S.ONE_LINK_OPTIMAL),
        (S.ONE_LINK_OPTIMAL, S.ONE_LINK),
        (S.PROPOSED, S.PROPOSED_RANDOM_RIS),
        (S.PROPOSED, S.ONE_LINK),
    ]
    + [(s, S.RIS_FREE) for s in ALL_SCHEMES if s not in (S.RIS_FREE, S.RIS_FREE_NO_DIRECT)],
)
def test_per_trial_dominance(k8, hi, lo):
    res, info = k8
    assert all(v == 1.0 for v in info["feasible"].values())
    assert np.all(res[hi] >= res[lo] - 1e-9 * np.maximum(1, res[lo]))


def test_common_random_numbers(cfg):
    alone, _ = evaluate_schemes(cfg, [S.RIS_FREE, S.PROPOSED_RANDOM_RIS], 50, make_rng(3), FAST)
    together, _ = evaluate_schemes(cfg, ALL_SCHEMES, 50, make_rng(3), FAST)
    np.testing.assert_array_equal(alone[S.RIS_FREE], together[S.RIS_FREE])
    np.testing.assert_array_equal(alone[S.PROPOSED_RANDOM_RIS], together[S.PROPOSED_RANDOM_RIS])


def test_scheme_not_applicable(cfg):
    one = cfg.with_(blocked_uavs=(0,))
    for s in (S.PROPOSED, S.PROPOSED_OPTIMAL, S.PROPOSED_RANDOM_RIS):
        with pytest.raises(SchemeNotApplicable):
            run_scheme(one, s, make_rng(0), FAST)
    none = cfg.with_(blocked_uavs=())
    with pytest.raises(SchemeNotApplicable):
        run_scheme(none, S.ONE_LINK, make_rng(0), FAST)
    assert run_scheme(none, S.RIS_FREE, make_rng(0)) > 0
    assert run_scheme(one, S.ONE_LINK, make_rng(0), FAST) >= 0


def test_run_scheme_single_draw(cfg):
    v = run_scheme(cfg, "RisFree", make_rng(5))
    assert isinstance(v, float) and v > 0


def test_infeasible_trials_score_as_ris_free(cfg):
    c = cfg.with_(ris_position=(20_000, 0, 120))
    res, info = evaluate_schemes(c, [S.PROPOSED_RANDOM_RIS, S.RIS_FREE], 20, make_rng(6))
    assert info["feasible"]["ProposedRandomRIS"] == 0.0
    np.testing.assert_array_equal(res[S.PROPOSED_RANDOM_RIS], res[S.RIS_FREE])


# -- campaigns ---------------------------------------------------------------


def test_vs_k_trends(cfg):
    r = run_connectivity_vs_K(cfg, [4, 6, 8, 10], trials=100, sa_params=FAST)
    assert r.sweep_values == [4, 6, 8, 10]
    assert r.series["RisFreeNoDirect"] == [0.0] * 4
    for s in ALL_SCHEMES:
        v = r.series[s.value]
        assert all(a <= b for a, b in zip(v, v[1:])), s
    i10 = r.sweep_values.index(10)
    assert r.series["ProposedRandomRIS"][i10] < r.series["Proposed"][i10]
    assert len(r.meta["deployments"]) == 4


def test_vs_k_bounds(cfg):
    with pytest.raises(ValueError):
        run_connectivity_vs_K(cfg, [1, 4], trials=2)
    with pytest.raises(ValueError):
        run_connectivity_vs_K(cfg, [21], trials=2)


def test_vs_n_ris_free_flat(cfg):
    r = run_connectivity_vs_N(cfg, [40, 80], [S.RIS_FREE, S.PROPOSED_RANDOM_RIS], trials=100)
    assert r.series["RisFree"][0] == r.series["RisFree"][1]
    assert r.series["ProposedRandomRIS"][1] >= r.series["ProposedRandomRIS"][0]


def test_doubling_n_quadruples_gamma_x(cfg):
    a = cfg.ris_position
    r = sample_realization(cfg.with_(n_elements=200), a, make_rng(7), 2000)
    # fixed share, so only the coherent N^2 growth of the cascade sum remains
    q_small = channel_quality(r.truncate(100))[:, 0]
    q_big = channel_quality(r)[:, 0]
    ratio = np.mean(snr_approx(cfg, a, 0.8, q_big, 0)) / np.mean(snr_approx(cfg, a, 0.8, q_small, 0))
    assert ratio == pytest.approx(4.0, rel=0.05)


@pytest.fixture(scope="module")
def fig2(cfg):
    return run_fig2(cfg, [0.2, 0.5, 0.8, 1.0], [25, 50, 100, 200], trials=10_000)


def test_fig2_empty_partition(fig2):
    by_rho, _ = fig2
    i = by_rho.sweep_values.index(1.0)
    assert by_rho.series["approx_y"][i] == 0.0


def test_fig2_approximation_validity(fig2):
    by_rho, _ = fig2
    for i, rho in enumerate(by_rho.sweep_values):
        if rho == 1.0:
            continue
        assert by_rho.series["gap_x"][i] < 0.05, rho
        assert by_rho.series["gap_y"][i] < 0.05, rho


def test_fig2_rates_grow_with_n(fig2):
    _, by_n = fig2
    assert by_n.meta["rho_x"] == 0.8
    for key in ("exact_x", "approx_x", "exact_y", "approx_y"):
        v = by_n.series[key]
        assert all(a < b for a, b in zip(v, v[1:])), key


def test_rate_vs_zeta_trends_and_scaling(cfg):
    r = run_rate_vs_zeta(cfg, [0.1, 0.2, 0.3, 0.4], trials=500, q_mode="mean")
    rx, ry = r.series["rate_x"], r.series["rate_y"]
    assert all(a > b for a, b in zip(rx, rx[1:]))
    assert all(a < b for a, b in zip(ry, ry[1:]))
    rho = r.series["rho_y"]
    assert rho[2] / rho[0] == pytest.approx(math.sqrt(3.0), rel=1e-9)
    with pytest.raises(ValueError):
        run_rate_vs_zeta(cfg, [0.0], trials=10)


def test_rate_vs_gamma0_ratio(cfg):
    r = run_rate_vs_gamma0(cfg, [60, 65], trials=500, zeta=0.1)
    rho = r.series["rho_y"]
    assert rho[1] / rho[0] == pytest.approx(1.7783, rel=0.01)
    assert rho[0] == pytest.approx(0.0655, rel=0.05)


@pytest.mark.xfail(strict=True, reason="closed form gives 0.0655 * 10**(15/20) = 0.37, not 0.30")
def test_rate_vs_gamma0_high_threshold_share(cfg):
    r = run_rate_vs_gamma0(cfg, [75], trials=500, zeta=0.1)
    assert r.series["rho_y"][0] == pytest.approx(0.30, abs=0.03)


def test_rate_vs_gamma0_infeasible_not_clipped(cfg):
    r = run_rate_vs_gamma0(cfg, [60, 90], trials=200, zeta=0.1)
    assert r.series["feasible"] == [1.0, 0.0]
    assert r.series["rho_y"][1] > 1.0
    assert math.isnan(r.series["rate_y"][1])


def test_stderr_shrinks_with_trials(cfg):
    a = run_rate_vs_zeta(cfg, [0.2], trials=100, seed=8)
    b = run_rate_vs_zeta(cfg, [0.2], trials=400, seed=8)
    ratio = a.stderr["rho_y"][0] / b.stderr["rho_y"][0]
    assert ratio == pytest.approx(2.0, rel=0.25)


# -- output ------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_result(cfg):
    return run_rate_vs_zeta(cfg, [0.1, 0.3], trials=50)


def test_emit_json_round_trip(small_result, tmp_path):
    p = tmp_path / "r.json"
    emit(small_result, "json", p)
    back = load_result(p)
    assert isinstance(back, ExperimentResult)
    assert back.sweep_values == small_result.sweep_values
    assert back.config.keys() == small_result.config.keys()
    assert back.config["zeta"] == small_result.config["zeta"]
    assert back.config["beta0"] == pytest.approx(small_result.config["beta0"], rel=1e-11)
    for k, v in small_result.series.items():
        np.testing.assert_allclose(back.series[k], v, rtol=1e-11)
    # a second round trip is exact
    p2 = tmp_path / "r2.json"
    emit(back, "json", p2)
    assert p2.read_bytes() == p.read_bytes()


def test_emit_csv_rows_and_sidecar(small_result, tmp_path):
    p = tmp_path / "r.csv"
    emit(small_result, "csv", p)
    rows = p.read_text().splitlines()
    assert rows[0] == "sweep,value,series,mean,stderr,trials"
    assert len(rows) - 1 == len(small_result.sweep_values) * len(small_result.series)
    meta = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert meta["config"]["zeta"] == 0.2 and meta["trials"] == 50


def test_emit_twelve_significant_digits(small_result):
    buf = io.StringIO()
    emit(small_result, "csv", buf)
    for line in buf.getvalue().splitlines()[1:]:
        mean = line.split(",")[3]
        digits = mean.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
        assert len(digits) <= 12


def test_emit_deterministic(cfg, tmp_path):
    for name in ("a", "b"):
        emit(run_rate_vs_zeta(cfg, [0.2, 0.4], trials=100, seed=9), "csv", tmp_path / f"{name}.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.meta.json").read_bytes() == (tmp_path / "b.csv.meta.json").read_bytes()


def test_emit_errors(small_result, tmp_path):
    with pytest.raises(ValueError):
        emit(small_result, "xml", tmp_path / "x")
    missing = tmp_path / "no" / "such" / "dir.csv"
    with pytest.raises(OSError, match="dir.csv"):
        emit(small_result, "csv", missing)
