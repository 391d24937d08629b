"""Split the RIS between two blocked UAVs at the published geometry.

UAV_y receives just enough elements to reach zeta * gamma0; UAV_x keeps the
rest. Raising the RIS threshold by 5 dB scales the UAV_y share by 10**(5/20).
"""

import numpy as np

from risconnect import default_scenario, make_rng, sample_realization, solve_partition

cfg = default_scenario().with_(zeta=0.1)
r = sample_realization(cfg, cfg.ris_position, make_rng(1), trials=2000)

for thr in (60.0, 65.0, 70.0):
    c = cfg.with_(thr_ris_db=thr)
    sol = solve_partition(c, c.ris_position, r)
    shares = sol.shares.mean(axis=0)
    counts = np.ceil(shares * c.n_elements).astype(int)
    print(f"gamma0 = {thr:4.1f} dB  rho_x = {shares[0]:.4f}  rho_y = {shares[1]:.4f}"
          f"  elements = {counts.tolist()}  feasible = {sol.feasible.mean():.0%}")
