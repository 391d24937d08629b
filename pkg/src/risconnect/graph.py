"""Weighted connectivity graph, Laplacian and algebraic connectivity.

Node 0 is the UE; UAV ``k`` is node ``k + 1``. Edge weights are SNRs in dB,
clamped at zero from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "Edge",
    "NetworkGraph",
    "UE_NODE",
    "uav_node",
    "snr_weight",
    "build_graph",
    "build_weight_matrices",
    "laplacian",
    "laplacian_from_weights",
    "algebraic_connectivity",
    "reliability",
    "add_ris_edges",
    "to_adjacency_list",
    "write_adjacency_list",
]

UE_NODE = 0
DISCONNECT_RTOL = 1e-9


def uav_node(k: int) -> int:
    return k + 1


def snr_weight(snr_lin):
    """Linear SNR to a nonnegative dB edge weight."""
    snr_lin = np.asarray(snr_lin, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.maximum(10.0 * np.log10(snr_lin), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    weight: float


@dataclass(frozen=True)
class NetworkGraph:
    n_nodes: int
    edges: tuple[Edge, ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        canon = []
        for e in self.edges:
            u, v = sorted((int(e.u), int(e.v)))
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u and v < self.n_nodes):
                raise ValueError(f"edge ({u}, {v}) outside {self.n_nodes} nodes")
            w = float(e.weight)
            if not (math.isfinite(w) and w >= 0):
                raise ValueError(f"edge ({u}, {v}) has invalid weight {w}")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            canon.append(Edge(u, v, w))
        object.__setattr__(self, "edges", tuple(canon))
        if not self.labels:
            labels = ("UE",) + tuple(f"UAV{k}" for k in range(self.n_nodes - 1))
            object.__setattr__(self, "labels", labels)

    def has_edge(self, u: int, v: int) -> bool:
        a, b = sorted((u, v))
        return any(e.u == a and e.v == b for e in self.edges)

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.n_nodes, self.n_nodes))
        for e in self.edges:
            w[e.u, e.v] = w[e.v, e.u] = e.weight
        return w

    def with_edges(self, edges: Iterable[Edge]) -> "NetworkGraph":
        return NetworkGraph(self.n_nodes, self.edges + tuple(edges), self.labels)

    def without_node(self, node: int) -> "NetworkGraph":
        """Drop ``node`` and its incident edges; higher nodes shift down by one."""

        def shift(i):
            return i - 1 if i > node else i

        edges = tuple(
            Edge(shift(e.u), shift(e.v), e.weight)
            for e in self.edges
            if node not in (e.u, e.v)
        )
        labels = self.labels[:node] + self.labels[node + 1 :]
        return NetworkGraph(self.n_nodes - 1, edges, labels)


def build_weight_matrices(
    config: ScenarioConfig, direct_snrs, uav_snrs_db, drop_ue: bool = False
) -> np.ndarray:
    """Weighted adjacency ``(..., V, V)`` without any RIS edge.

    ``direct_snrs`` is the linear UE->UAV SNR per UAV (leading batch axes
    allowed); blocked entries are ignored. ``uav_snrs_db`` is the K x K dB
    table from :func:`risconnect.channel.uav_snr_matrix`.
    """
    direct = np.asarray(direct_snrs, dtype=float)
    uav = np.asarray(uav_snrs_db, dtype=float)
    k = config.n_uavs
    batch = direct.shape[:-1]
    w = np.zeros(batch + (k + 1, k + 1))

    uu = np.where(uav >= config.thr_uav_db, np.maximum(uav, 0.0), 0.0)
    np.fill_diagonal(uu, 0.0)
    w[..., 1:, 1:] = uu

    if not drop_ue:
        ue = np.where(direct >= config.thr_ue_lin, snr_weight(np.maximum(direct, 0)), 0.0)
        ue[..., list(config.blocked_uavs)] = 0.0
        w[..., 0, 1:] = ue
        w[..., 1:, 0] = ue
    return w


def build_graph(config: ScenarioConfig, direct_snrs, uav_snrs_db) -> NetworkGraph:
    """Threshold rule: an edge exists iff its SNR reaches the class threshold.

    Blocked UAVs never get a direct UE edge regardless of ``direct_snrs``.
    """
    direct = np.asarray(direct_snrs, dtype=float)
    uav = np.asarray(uav_snrs_db, dtype=float)
    k = config.n_uavs
    blocked = set(config.blocked_uavs)
    edges = []
    for a in range(k):
        for b in range(a + 1, k):
            if uav[a, b] >= config.thr_uav_db:
                edges.append(Edge(uav_node(a), uav_node(b), max(float(uav[a, b]), 0.0)))
    for v in range(k):
        if v not in blocked and direct[v] >= config.thr_ue_lin:
            edges.append(Edge(UE_NODE, uav_node(v), snr_weight(direct[v])))
    return NetworkGraph(k + 1, tuple(edges))


def laplacian(graph: NetworkGraph) -> np.ndarray:
    """``M = A diag(w) A^T`` from the oriented incidence matrix."""
    n, m = graph.n_nodes, len(graph.edges)
    a = np.zeros((n, m))
    w = np.empty(m)
    for l, e in enumerate(graph.edges):
        a[e.u, l] = 1.0
        a[e.v, l] = -1.0
        w[l] = e.weight
    return (a * w) @ a.T


def laplacian_from_weights(w) -> np.ndarray:
    """Laplacian ``diag(W 1) - W`` for (batched) weighted adjacency matrices."""
    w = np.asarray(w, dtype=float)
    lap = -w.copy()
    idx = np.arange(w.shape[-1])
    lap[..., idx, idx] = w.sum(axis=-1) - w[..., idx, idx]
    return lap


def algebraic_connectivity(lap, check: bool = True):
    """Second-smallest Laplacian eigenvalue, zeroed below the disconnection tolerance.

    Accepts a single ``(V, V)`` matrix or a stack ``(..., V, V)``.
    """
    lap = np.asarray(lap, dtype=float)
    if check:
        scale = max(1.0, float(np.max(np.abs(lap)))) if lap.size else 1.0
        if np.max(np.abs(lap - np.swapaxes(lap, -1, -2)), initial=0.0) > 1e-9 * scale:
            raise ValueError("Laplacian must be symmetric")
    v = lap.shape[-1]
    if v < 2:
        out = np.zeros(lap.shape[:-2])
        return float(out) if out.ndim == 0 else out
    ev = np.linalg.eigvalsh(lap)
    lam2 = ev[..., 1]
    tol = DISCONNECT_RTOL * np.maximum(1.0, ev[..., -1])
    out = np.where(lam2 < tol, 0.0, lam2)
    return float(out) if out.ndim == 0 else out


def reliability(graph: NetworkGraph, j: int) -> float:
    """``1 / lambda2`` after removing UAV ``j``; ``inf`` if that disconnects the rest."""
    if not 0 <= j < graph.n_nodes - 1:
        raise ValueError(f"reliability is defined for UAV indices, got {j}")
    lam = algebraic_connectivity(laplacian(graph.without_node(uav_node(j))))
    return math.inf if lam == 0 else 1.0 / lam


def add_ris_edges(
    graph: NetworkGraph, blocked: Sequence[int], ris_snrs: Sequence[float]
) -> NetworkGraph:
    """Add one UE -> UAV edge per blocked UAV, weighted by its RIS-link SNR."""
    if len(blocked) != len(ris_snrs):
        raise ValueError("blocked and ris_snrs must have the same length")
    new = []
    for k, snr in zip(blocked, ris_snrs):
        if graph.has_edge(UE_NODE, uav_node(k)):
            raise ValueError(f"UE-UAV{k} edge already present")
        new.append(Edge(UE_NODE, uav_node(k), snr_weight(snr)))
    return graph.with_edges(new)


def to_adjacency_list(graph: NetworkGraph) -> str:
    return "".join(f"{e.u} {e.v} {e.weight:.12g}\n" for e in graph.edges)


def write_adjacency_list(graph: NetworkGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_adjacency_list(graph))
