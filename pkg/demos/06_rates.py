"""Rates and shares of both blocked UAVs as zeta and gamma0 vary.

Results are also written as CSV with a JSON sidecar holding the config.
"""

import sys

from risconnect import default_scenario
from risconnect.experiments import emit, run_rate_vs_gamma0, run_rate_vs_zeta

cfg = default_scenario()
by_zeta = run_rate_vs_zeta(cfg, [0.1, 0.2, 0.3, 0.4, 0.5], trials=2000)
for i, z in enumerate(by_zeta.sweep_values):
    s = by_zeta.series
    print(f"zeta {z:.1f}: rho_y {s['rho_y'][i]:.3f}  rate_x {s['rate_x'][i] / 1e6:.2f}"
          f"  rate_y {s['rate_y'][i] / 1e6:.2f} Mbps")

by_gamma = run_rate_vs_gamma0(cfg, [60, 65, 70, 75, 80], trials=2000, zeta=0.1)
print()
emit(by_gamma, "csv", sys.stdout)
