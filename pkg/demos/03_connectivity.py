"""Algebraic connectivity of the UE-UAV graph with and without the RIS edges."""

from risconnect import default_scenario, make_rng, sample_realization
from risconnect.channel import uav_snr_matrix
from risconnect.deploy import direct_snr_table
from risconnect.graph import add_ris_edges, algebraic_connectivity, build_graph, laplacian, reliability
from risconnect.partition import solve_partition

cfg = default_scenario()
r = sample_realization(cfg, cfg.ris_position, make_rng(3))
g = build_graph(cfg, direct_snr_table(cfg, r), uav_snr_matrix(cfg))
sol = solve_partition(cfg, cfg.ris_position, r)
g_ris = add_ris_edges(g, sol.uavs, sol.snrs)

print(f"edges without RIS: {len(g.edges)}, with RIS: {len(g_ris.edges)}")
print(f"lambda2 without RIS: {algebraic_connectivity(laplacian(g)):.2f}")
print(f"lambda2 with RIS:    {algebraic_connectivity(laplacian(g_ris)):.2f}")
for k in range(cfg.n_uavs):
    print(f"reliability when UAV{k} fails: {reliability(g_ris, k):.4g}")
