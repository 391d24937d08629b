"""Fading, path loss, RIS phase configuration and link SNRs.

Realizations may carry a leading trial axis: ``ue_ris_amp`` is ``(..., N)``,
``ris_uav_amp`` is ``(..., N, J)`` and ``direct_amp`` is ``(..., K)``. Column
``j`` of the RIS->UAV arrays belongs to ``config.blocked_uavs[j]``. Path-loss
gains depend only on geometry and are never batched.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .scenario import Position3D, ScenarioConfig, distance, positions_array

__all__ = [
    "FadingParams",
    "ChannelRealization",
    "PhaseProfile",
    "NoDirectLink",
    "sample_nakagami",
    "sample_realization",
    "pathloss_ref",
    "pathloss_umi",
    "pathloss_los_uav",
    "link_gain",
    "ris_gains",
    "direct_gains",
    "cascade_gain",
    "snr_direct",
    "snr_uav_uav",
    "uav_snr_matrix",
    "partition_assignment",
    "element_counts",
    "optimal_phases",
    "quantize_phases",
    "channel_quality",
    "snr_exact",
    "snr_approx",
    "rate",
    "write_realization_trace",
]

TWO_PI = 2.0 * math.pi
UMI_MIN_DISTANCE = 10.0

# Incremented each time a UMi distance is clamped to its validity floor.
warning_counter: Counter = Counter()


class NoDirectLink(LookupError):
    """The requested UAV is blocked and has no direct UE link."""


@dataclass(frozen=True)
class FadingParams:
    m: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.m >= 0.5:
            raise ValueError(f"Nakagami shape m={self.m} must be >= 0.5")
        if not self.omega > 0:
            raise ValueError(f"Nakagami spread omega={self.omega} must be > 0")


def sample_nakagami(params: FadingParams, rng: np.random.Generator, size=None):
    """Nakagami-m amplitudes as the square root of Gamma(m, omega/m) draws."""
    return np.sqrt(rng.gamma(params.m, params.omega / params.m, size=size))


@dataclass(frozen=True)
class ChannelRealization:
    ue_ris_amp: np.ndarray
    ue_ris_phase: np.ndarray
    ris_uav_amp: np.ndarray
    ris_uav_phase: np.ndarray
    direct_amp: np.ndarray
    pl_ue_ris: float
    pl_ris_uav: np.ndarray
    pl_direct: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.ue_ris_amp.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.ue_ris_amp.shape[:-1]

    def relocate(self, config: ScenarioConfig, alpha) -> "ChannelRealization":
        """Same small-scale fading, path losses re-evaluated for an RIS at ``alpha``."""
        pl_ur, pl_rk = ris_gains(config, alpha, config.blocked_uavs)
        return replace(self, pl_ue_ris=pl_ur, pl_ris_uav=pl_rk)

    def truncate(self, n: int) -> "ChannelRealization":
        """Keep the first ``n`` RIS elements (nested realizations across N)."""
        if not 1 <= n <= self.n_elements:
            raise ValueError(f"cannot truncate {self.n_elements} elements to {n}")
        return replace(
            self,
            ue_ris_amp=self.ue_ris_amp[..., :n],
            ue_ris_phase=self.ue_ris_phase[..., :n],
            ris_uav_amp=self.ris_uav_amp[..., :n, :],
            ris_uav_phase=self.ris_uav_phase[..., :n, :],
        )

    def trial(self, i: int) -> "ChannelRealization":
        return replace(
            self,
            ue_ris_amp=self.ue_ris_amp[i],
            ue_ris_phase=self.ue_ris_phase[i],
            ris_uav_amp=self.ris_uav_amp[i],
            ris_uav_phase=self.ris_uav_phase[i],
            direct_amp=self.direct_amp[i],
        )


@dataclass(frozen=True)
class PhaseProfile:
    """RIS phase shifts plus the element -> target-column assignment."""

    theta: np.ndarray
    assignment: np.ndarray


# -- path loss ---------------------------------------------------------------


def pathloss_ref(d, beta0: float):
    """Power gain ``beta0 / d**2`` relative to the 1 m reference distance."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = beta0 / d**2
    return float(out) if out.ndim == 0 else out


def pathloss_umi(d, fc: float, los: bool = False):
    """3GPP TR 38.901 UMi street-canyon loss in dB (no shadowing)."""
    d = np.asarray(d, dtype=float)
    n_clamped = int(np.count_nonzero(d < UMI_MIN_DISTANCE))
    if n_clamped:
        warning_counter["umi_clamp"] += n_clamped
    d = np.maximum(d, UMI_MIN_DISTANCE)
    fc_ghz = fc / 1e9
    pl = 32.4 + 21.0 * np.log10(d) + 20.0 * np.log10(fc_ghz)
    if not los:
        pl = np.maximum(pl, 35.3 * np.log10(d) + 22.4 + 21.3 * np.log10(fc_ghz))
    return float(pl) if pl.ndim == 0 else pl


def pathloss_los_uav(d, fc: float, c: float = 3e8):
    """Free-space LoS loss ``20 log10(4 pi fc d / c)`` in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 20.0 * np.log10(4.0 * math.pi * fc * d / c)
    return float(out) if out.ndim == 0 else out


def link_gain(config: ScenarioConfig, d, model: str):
    """Linear power gain of a link of length ``d`` under ``model``.

    Distances below the 1 m reference are clamped to it so the gain never
    exceeds ``beta0``.
    """
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    if model == "ref":
        return pathloss_ref(d, config.beta0)
    if model == "fspl":
        return 10.0 ** (-pathloss_los_uav(d, config.carrier, config.light_speed) / 10.0)
    if model in ("umi-los", "umi-nlos"):
        return 10.0 ** (-pathloss_umi(d, config.carrier, los=model == "umi-los") / 10.0)
    raise ValueError(f"unknown path-loss model {model!r}")


def ris_gains(config: ScenarioConfig, alpha, uavs: Sequence[int]):
    """``(beta_UR, beta_RK[uavs])`` for an RIS at ``alpha``."""
    a = np.asarray(tuple(alpha), dtype=float)
    d_ur = np.linalg.norm(a - np.asarray(tuple(config.ue_position)))
    pos = _uav_array(config)[list(uavs)]
    d_rk = np.linalg.norm(pos - a, axis=1)
    return (
        float(link_gain(config, d_ur, config.ris_pathloss)),
        np.atleast_1d(link_gain(config, d_rk, config.ris_pathloss)),
    )


@lru_cache(maxsize=64)
def _uav_array(config: ScenarioConfig) -> np.ndarray:
    out = positions_array(config.uav_positions)
    out.flags.writeable = False
    return out


def direct_gains(config: ScenarioConfig) -> np.ndarray:
    pos = _uav_array(config)
    d = np.linalg.norm(pos - np.asarray(tuple(config.ue_position)), axis=1)
    return np.atleast_1d(link_gain(config, d, config.direct_pathloss))


def cascade_gain(config: ScenarioConfig, alpha, uav):
    """``p beta_UR beta_RK / N0``: SNR per unit squared coherent amplitude.

    ``uav`` may be a single index or a sequence (then an array is returned).
    """
    uavs = np.atleast_1d(uav)
    pl_ur, pl_rk = ris_gains(config, alpha, uavs)
    out = config.ue_power_w * pl_ur * pl_rk / config.noise_w
    return float(out[0]) if np.ndim(uav) == 0 else out


# -- sampling ----------------------------------------------------------------


def sample_realization(
    config: ScenarioConfig,
    alpha,
    rng: np.random.Generator,
    trials: int | None = None,
) -> ChannelRealization:
    """Draw all small-scale fading for one trial (or ``trials`` trials).

    Amplitudes follow the configured Nakagami laws and phases are uniform on
    ``[0, 2 pi)``; everything is i.i.d.
    """
    if np.asarray(tuple(alpha))[2] < 0:
        raise ValueError("RIS altitude must be >= 0")
    lead = () if trials is None else (trials,)
    n, j, k = config.n_elements, len(config.blocked_uavs), config.n_uavs
    ur = FadingParams(config.m1, config.omega1)
    rk = FadingParams(config.m2, config.omega2)
    uk = FadingParams(config.fading_direct_m, config.fading_direct_omega)

    ue_ris_amp = sample_nakagami(ur, rng, lead + (n,))
    ue_ris_phase = rng.uniform(0.0, TWO_PI, lead + (n,))
    ris_uav_amp = sample_nakagami(rk, rng, lead + (n, j))
    ris_uav_phase = rng.uniform(0.0, TWO_PI, lead + (n, j))
    direct_amp = sample_nakagami(uk, rng, lead + (k,))
    pl_ur, pl_rk = ris_gains(config, alpha, config.blocked_uavs)
    return ChannelRealization(
        ue_ris_amp=ue_ris_amp,
        ue_ris_phase=ue_ris_phase,
        ris_uav_amp=ris_uav_amp,
        ris_uav_phase=ris_uav_phase,
        direct_amp=direct_amp,
        pl_ue_ris=pl_ur,
        pl_ris_uav=pl_rk,
        pl_direct=direct_gains(config),
    )


# -- SNRs --------------------------------------------------------------------


def snr_direct(config: ScenarioConfig, k: int, realization: ChannelRealization):
    if k in config.blocked_uavs:
        raise NoDirectLink(f"UAV {k} is blocked")
    amp = realization.direct_amp[..., k]
    return config.ue_power_w * realization.pl_direct[k] * amp**2 / config.noise_w


def snr_uav_uav(config: ScenarioConfig, k: int, k2: int) -> float:
    """UAV-to-UAV SNR in dB (deterministic LoS link)."""
    if k == k2:
        raise ValueError("UAV-UAV SNR needs two distinct UAVs")
    d = distance(config.uav_positions[k], config.uav_positions[k2])
    gamma = pathloss_los_uav(d, config.carrier, config.light_speed)
    return config.uav_power_dbm - gamma - config.noise_dbm


def uav_snr_matrix(config: ScenarioConfig) -> np.ndarray:
    """K x K table of UAV-UAV SNRs in dB; the diagonal is ``-inf``."""
    pos = positions_array(config.uav_positions)
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    out = np.full(d.shape, -np.inf)
    off = ~np.eye(len(pos), dtype=bool)
    # coincident UAVs would give an infinite SNR; keep them finite at 1 mm
    out[off] = (
        config.uav_power_dbm
        - pathloss_los_uav(np.maximum(d[off], 1e-3), config.carrier, config.light_speed)
        - config.noise_dbm
    )
    return out


# -- RIS configuration -------------------------------------------------------


def element_counts(shares: Sequence[float], n: int) -> list[int]:
    """``ceil(rho_j N)`` per partition, guarded against float fuzz."""
    return [int(math.ceil(round(r * n, 9))) for r in shares]


def partition_assignment(shares: Sequence[float], n: int) -> np.ndarray:
    """Contiguous row-major element blocks, one per share.

    Every partition but the last gets ``ceil(rho_j N)`` elements (truncated
    once the array is used up); the last takes the remainder.
    """
    counts = element_counts(shares[:-1], n)
    out = np.empty(n, dtype=int)
    start = 0
    for col, c in enumerate(counts):
        stop = min(n, start + c)
        out[start:stop] = col
        start = stop
    out[start:] = len(shares) - 1
    return out


def optimal_phases(realization: ChannelRealization, assignment) -> PhaseProfile:
    """Phase nulling: ``theta_n = phi_n + psi_{n, j(n)}`` modulo 2 pi."""
    assignment = np.asarray(assignment, dtype=int)
    if assignment.shape[-1] != realization.n_elements:
        raise ValueError("assignment must cover every RIS element")
    psi = realization.ris_uav_phase
    idx = np.broadcast_to(assignment, psi.shape[:-1])[..., None]
    psi_sel = np.take_along_axis(psi, idx, axis=-1)[..., 0]
    theta = np.mod(realization.ue_ris_phase + psi_sel, TWO_PI)
    return PhaseProfile(theta=theta, assignment=assignment)


def quantize_phases(profile: PhaseProfile, b: int | None) -> PhaseProfile:
    """Snap each phase to the nearest of ``2**b`` uniform levels; ``None`` is exact."""
    if b is None:
        return profile
    if b < 1:
        raise ValueError("bit resolution must be >= 1")
    levels = 2**b
    step = TWO_PI / levels
    q = np.mod(np.rint(profile.theta / step), levels) * step
    return PhaseProfile(theta=q, assignment=profile.assignment)


def channel_quality(realization: ChannelRealization, j: int | None = None):
    """Cascade amplitude sum ``Q_j = sum_n |g_UR_n| |g_RK_nj|``.

    With ``j=None`` all columns are returned, shape ``(..., J)``.
    """
    prod = realization.ue_ris_amp[..., :, None] * realization.ris_uav_amp
    q = prod.sum(axis=-2)
    return q if j is None else q[..., j]


def snr_exact(
    config: ScenarioConfig,
    realization: ChannelRealization,
    profile: PhaseProfile,
    j: int,
):
    """SNR at target column ``j`` from the full complex sum over all elements.

    Elements aligned to other targets still contribute their (non-aligned)
    cascaded channel with the phase they were configured with.
    """
    amp = realization.ue_ris_amp * realization.ris_uav_amp[..., j]
    phase = profile.theta - realization.ue_ris_phase - realization.ris_uav_phase[..., j]
    total = np.sum(amp * np.exp(1j * phase), axis=-1)
    gain = config.ue_power_w * realization.pl_ue_ris * realization.pl_ris_uav[j]
    return gain * np.abs(total) ** 2 / config.noise_w


def snr_approx(config: ScenarioConfig, alpha, rho, q, uav: int):
    """Aligned-only SNR ``p beta_UR beta_RK rho^2 Q^2 / N0`` for ``uav``."""
    rho = np.asarray(rho, dtype=float)
    if np.any((rho < 0) | (rho > 1)):
        raise ValueError("share must lie in [0, 1]")
    if np.any(np.asarray(q) < 0):
        raise ValueError("Q must be nonnegative")
    out = cascade_gain(config, alpha, uav) * rho**2 * np.asarray(q, dtype=float) ** 2
    return float(out) if np.ndim(out) == 0 else out


def rate(snr, bandwidth: float):
    """Shannon rate ``B log2(1 + snr)`` in bit/s."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be nonnegative")
    out = bandwidth * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def write_realization_trace(realization: ChannelRealization, path) -> None:
    """Columnar CSV dump of a single (unbatched) realization."""
    if realization.batch_shape:
        raise ValueError("trace dump expects a single realization")
    j = realization.ris_uav_amp.shape[-1]
    header = ["element", "ue_ris_amp", "ue_ris_phase"]
    for c in range(j):
        header += [f"ris_uav_amp_{c}", f"ris_uav_phase_{c}"]
    cols = [np.arange(realization.n_elements), realization.ue_ris_amp, realization.ue_ris_phase]
    for c in range(j):
        cols += [realization.ris_uav_amp[:, c], realization.ris_uav_phase[:, c]]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join([str(int(row[0]))] + [f"{v:.12g}" for v in row[1:]]) + "\n")
