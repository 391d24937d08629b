"""Anneal the RIS position to maximise the mean algebraic connectivity."""

from risconnect import default_scenario, make_rng
from risconnect.deploy import SAParams, sa_optimize

cfg = default_scenario()
res = sa_optimize(cfg, None, SAParams(), make_rng(4))
print(f"start {tuple(cfg.ris_position)}: lambda2 = {res.initial_objective:.2f}")
x, y, z = res.position
print(f"best ({x:.1f}, {y:.1f}, {z:.1f}): lambda2 = {res.objective:.2f}")
print(f"{len(res.trace)} proposals over {1 + SAParams().restarts} chains")
