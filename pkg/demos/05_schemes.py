"""Mean connectivity of every scheme as the swarm grows.

All schemes see the same channel draws in each trial, so their gaps
reflect the scheme and not sampling noise.
"""

from risconnect import default_scenario
from risconnect.deploy import SAParams
from risconnect.experiments import ALL_SCHEMES, run_connectivity_vs_K

quick = SAParams(iterations_per_temperature=10, cooling_factor=0.85, restarts=1, probes=20)
res = run_connectivity_vs_K(default_scenario(), [4, 8, 12], trials=200, sa_params=quick)

print("scheme".ljust(20) + "".join(f"K={k:<8d}" for k in res.sweep_values))
for s in ALL_SCHEMES:
    print(s.value.ljust(20) + "".join(f"{v:<10.1f}" for v in res.series[s.value]))
