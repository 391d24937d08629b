"""Closed-form RIS partitioning between blocked UAVs.

The less reliable UAVs get the smallest share that meets their
``zeta * gamma0`` SNR cap with equality; the most reliable UAV takes every
element that is left over.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelRealization, cascade_gain, channel_quality
from .scenario import ScenarioConfig

__all__ = [
    "DegenerateChannelError",
    "PartitionSolution",
    "Verdict",
    "rho_y_closed_form",
    "rho_x_remainder",
    "solve_partition",
    "solve_partition_q",
    "check_feasibility",
]

FEASIBLE = "feasible"
C2_RTOL = 1e-9
# cap on the SNR-shortfall term of the violation magnitude, in decades
_SHORTFALL_CAP = 10.0


class DegenerateChannelError(ValueError):
    """A cascade sum Q is zero so no finite share can meet the SNR target."""


TAGS = (FEASIBLE, "domain", "C3", "C1", "C2")


@dataclass(frozen=True)
class Verdict:
    """Feasibility verdict; ``code`` indexes ``TAGS`` (0 means feasible).

    Batched solutions carry arrays for ``code`` and ``violation``.
    """

    code: object
    violation: object

    @property
    def tag(self):
        t = np.asarray(TAGS)[self.code]
        return str(t) if np.ndim(t) == 0 else t

    @property
    def feasible(self):
        return np.asarray(self.code) == 0


@dataclass(frozen=True)
class PartitionSolution:
    """Shares, element counts and approximated SNRs, most reliable UAV first.

    Array fields carry the realization's batch axes in front of the last
    (per-UAV) axis.
    """

    uavs: tuple[int, ...]
    shares: np.ndarray
    element_counts: np.ndarray
    snrs: np.ndarray
    zetas: tuple[float, ...]
    verdict: Verdict

    @property
    def feasible(self):
        f = self.verdict.feasible
        return bool(f) if f.ndim == 0 else f


def rho_y_closed_form(
    config: ScenarioConfig,
    alpha,
    q_y,
    uav: int | None = None,
    zeta: float | None = None,
):
    """Share whose aligned SNR equals ``zeta * gamma0`` exactly.

    Not clamped: values above one signal an infeasible geometry.
    """
    uav = config.blocked_uavs[1] if uav is None else uav
    zeta = config.zeta if zeta is None else zeta
    out = _closed_form(zeta * config.thr_ris_lin, cascade_gain(config, alpha, uav), q_y)
    return float(out) if out.ndim == 0 else out


def _closed_form(target, gain, q):
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise DegenerateChannelError("cascade sum Q is zero")
    return np.sqrt(target / (gain * q**2))


def rho_x_remainder(others) -> float:
    """``1 - sum(others)``, floored at zero."""
    others = np.asarray(others, dtype=float)
    out = np.maximum(1.0 - others.sum(axis=-1), 0.0)
    return float(out) if out.ndim == 0 else out


def _verdict(config: ScenarioConfig, shares, snrs, zetas) -> Verdict:
    shares = np.asarray(shares, dtype=float)
    snrs = np.asarray(snrs, dtype=float)
    g0 = config.thr_ris_lin
    zetas = np.asarray(zetas, dtype=float)

    domain = np.maximum(shares.max(axis=-1) - 1.0, 0.0) + np.maximum(-shares.min(axis=-1), 0.0)
    c3 = np.maximum(shares.sum(axis=-1) - 1.0, 0.0)
    with np.errstate(divide="ignore"):
        c1 = np.clip(np.log10(g0 / snrs[..., 0]), 0.0, _SHORTFALL_CAP)
        cap = zetas * g0
        c2 = np.clip(np.log10(snrs[..., 1:] / cap), 0.0, None).max(axis=-1, initial=0.0)
    c2_bad = np.any(snrs[..., 1:] > cap * (1 + C2_RTOL), axis=-1)
    c1_bad = snrs[..., 0] < g0

    code = np.where(domain > 0, 1, np.where(c3 > 0, 2, np.where(c1_bad, 3, np.where(c2_bad, 4, 0))))
    violation = np.where(code == 0, 0.0, domain + c3 + c1 + c2)
    if code.ndim == 0:
        return Verdict(int(code), float(violation))
    return Verdict(code, violation)


def solve_partition_q(
    config: ScenarioConfig,
    alpha,
    q,
    uavs: Sequence[int] | None = None,
    zetas: Sequence[float] | None = None,
) -> PartitionSolution:
    """Closed-form partition from precomputed cascade sums ``q[..., i]`` of ``uavs[i]``."""
    uavs = tuple(config.blocked_uavs if uavs is None else uavs)
    if len(uavs) < 2:
        raise ValueError("partitioning needs at least two blocked UAVs")
    zetas = tuple([config.zeta] * (len(uavs) - 1) if zetas is None else zetas)
    if len(zetas) != len(uavs) - 1:
        raise ValueError("need one zeta per lower-reliability UAV")
    q = np.asarray(q, dtype=float)

    gains = cascade_gain(config, alpha, uavs)
    targets = np.asarray(zetas) * config.thr_ris_lin
    lower = _closed_form(targets, gains[1:], q[..., 1:])
    rho_x = rho_x_remainder(lower)
    shares = np.concatenate([np.asarray(rho_x)[..., None], lower], axis=-1)
    snrs = gains * shares**2 * q**2
    counts = np.ceil(np.round(shares * config.n_elements, 9)).astype(int)
    return PartitionSolution(
        uavs=uavs,
        shares=shares,
        element_counts=counts,
        snrs=snrs,
        zetas=zetas,
        verdict=_verdict(config, shares, snrs, zetas),
    )


def solve_partition(
    config: ScenarioConfig,
    alpha,
    realization: ChannelRealization,
    uavs: Sequence[int] | None = None,
    zetas: Sequence[float] | None = None,
    q_mode: str = "trial",
) -> PartitionSolution:
    """Partition for ``uavs`` (most reliable first) at RIS position ``alpha``.

    ``q_mode="mean"`` replaces each per-trial cascade sum by its mean over
    the realization batch.
    """
    uavs = tuple(config.blocked_uavs if uavs is None else uavs)
    cols = [config.blocked_uavs.index(u) for u in uavs]
    q = channel_quality(realization)[..., cols]
    if q_mode == "mean":
        q = np.broadcast_to(q.reshape(-1, len(cols)).mean(axis=0), q.shape)
    elif q_mode != "trial":
        raise ValueError(f"unknown q_mode {q_mode!r}")
    return solve_partition_q(config, alpha, q, uavs, zetas)


def check_feasibility(config: ScenarioConfig, solution: PartitionSolution) -> Verdict:
    """Re-check the share and SNR constraints of ``solution``.

    Tags are checked in the order domain, C3 (shares sum), C1 (most
    reliable UAV reaches gamma0), C2 (others within their zeta cap); the
    first violation wins.
    """
    return _verdict(config, solution.shares, solution.snrs, solution.zetas)
