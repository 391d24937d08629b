"""Scenario configuration, geometry and seeded randomness.

All powers and thresholds are stored in dB/dBm exactly as entered. The
``*_w`` / ``*_lin`` properties are the only place they are converted to
linear units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterator, Sequence

import numpy as np
import tomli_w
from scipy.special import gammaln

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

__all__ = [
    "Position3D",
    "Box",
    "ScenarioConfig",
    "ConfigError",
    "BASELINE_UE",
    "BASELINE_UAV_X",
    "BASELINE_UAV_Y",
    "BASELINE_RIS",
    "DEFAULT_UAV_REGION",
    "free_space_beta0",
    "beta0_from_reported_share",
    "default_scenario",
    "load_scenario",
    "dump_scenario",
    "place_uavs_random",
    "distance",
    "make_rng",
    "spawn_rngs",
    "db_to_lin",
    "dbm_to_w",
]


class ConfigError(ValueError):
    """Raised for malformed or invalid scenario documents.

    ``key`` names the offending configuration entry when one is known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def db_to_lin(x):
    return np.power(10.0, np.divide(x, 10.0))


def dbm_to_w(x):
    return db_to_lin(x) * 1e-3


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"non-finite coordinate {name}={v}")
            object.__setattr__(self, name, v)

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def of(cls, p) -> "Position3D":
        if isinstance(p, Position3D):
            return p
        x, y, z = (float(v) for v in p)
        return cls(x, y, z)


@dataclass(frozen=True)
class Box:
    """Axis-aligned 3D box given by its low and high corners."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("box corners must have 3 coordinates")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box low corner {lo} exceeds high corner {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p, atol: float = 0.0) -> bool:
        a = np.asarray(tuple(p), dtype=float)
        return bool(np.all(a >= np.subtract(self.lo, atol)) and np.all(a <= np.add(self.hi, atol)))

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(tuple(p), dtype=float), self.lo, self.hi)


BASELINE_UE = Position3D(318.0, 220.0, 0.0)
BASELINE_UAV_X = Position3D(460.0, 340.0, 200.0)
BASELINE_UAV_Y = Position3D(370.0, 14.0, 200.0)
BASELINE_RIS = Position3D(0.0, 0.0, 120.0)

# 500 m x 500 m footprint, altitudes bracketing the quoted 200 m.
DEFAULT_UAV_REGION = Box((0.0, 0.0, 150.0), (500.0, 500.0, 250.0))


def free_space_beta0(fc: float, c: float = 3e8, d_ref: float = 1.0) -> float:
    """Free-space power gain at the reference distance, (c / (4 pi fc d_ref))^2."""
    return (c / (4.0 * math.pi * fc * d_ref)) ** 2


def _nakagami_mean(m: float, omega: float) -> float:
    return math.exp(gammaln(m + 0.5) - gammaln(m)) * math.sqrt(omega / m)


def beta0_from_reported_share(
    share: float,
    zeta: float,
    thr_ris_db: float,
    ue_power_dbm: float,
    noise_dbm: float,
    n_elements: int,
    d_ue_ris: float,
    d_ris_uav: float,
    m1: float = 5.0,
    omega1: float = 1.0,
    m2: float = 1.0,
    omega2: float = 1.0,
) -> float:
    """Reference gain that makes the closed-form share equal ``share``.

    Inverts the share formula for beta0 under the ``beta0 / d**2`` law, with
    the cascade sum replaced by its mean ``N E|g1| E|g2|``.
    """
    mean_q = n_elements * _nakagami_mean(m1, omega1) * _nakagami_mean(m2, omega2)
    target = db_to_lin(thr_ris_db) * zeta * dbm_to_w(noise_dbm) / dbm_to_w(ue_power_dbm)
    return d_ue_ris * d_ris_uav * math.sqrt(target) / (share * mean_q)


# Reproduces rho_y = 0.0655 at zeta = 0.1, 60 dB and the baseline geometry.
BASELINE_BETA0 = beta0_from_reported_share(
    share=0.0655,
    zeta=0.1,
    thr_ris_db=60.0,
    ue_power_dbm=23.0,
    noise_dbm=-120.0,
    n_elements=100,
    d_ue_ris=math.dist(tuple(BASELINE_UE), tuple(BASELINE_RIS)),
    d_ris_uav=math.dist(tuple(BASELINE_RIS), tuple(BASELINE_UAV_Y)),
)

PATHLOSS_MODELS = ("ref", "fspl", "umi-los", "umi-nlos")


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and algorithmic parameters of one experiment.

    UAVs are referred to by their 0-based index into ``uav_positions``.
    ``blocked_uavs`` lists the UAVs without a direct UE link, most reliable
    first (``[x, y]`` in the two-UAV case). ``bit_resolution=None`` means
    continuous (unquantized) RIS phases.
    """

    ue_power_dbm: float = 23.0
    uav_power_dbm: float = 30.0
    noise_dbm: float = -120.0
    n_elements: int = 100
    n_uavs: int = 8
    thr_ue_db: float = 10.0
    thr_uav_db: float = 55.0
    thr_ris_db: float = 60.0
    zeta: float = 0.2
    bit_resolution: int | None = 4
    bandwidth: float = 250e3
    carrier: float = 3e9
    light_speed: float = 3e8
    beta0: float = BASELINE_BETA0
    fading_direct_m: float = 1.0
    fading_direct_omega: float = 1.0
    m1: float = 5.0
    omega1: float = 1.0
    m2: float = 1.0
    omega2: float = 1.0
    direct_pathloss: str = "umi-nlos"
    ris_pathloss: str = "ref"
    ue_position: Position3D = BASELINE_UE
    uav_positions: tuple[Position3D, ...] = ()
    ris_position: Position3D = BASELINE_RIS
    blocked_uavs: tuple[int, ...] = (0, 1)
    rng_seed: int = 2024
    mc_trials: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "ue_position", Position3D.of(self.ue_position))
        object.__setattr__(self, "ris_position", Position3D.of(self.ris_position))
        object.__setattr__(
            self, "uav_positions", tuple(Position3D.of(p) for p in self.uav_positions)
        )
        object.__setattr__(self, "blocked_uavs", tuple(int(b) for b in self.blocked_uavs))
        if not self.uav_positions:
            object.__setattr__(
                self, "uav_positions", default_uav_positions(self.n_uavs, self.rng_seed)
            )
        self.validate()

    def validate(self) -> None:
        def bad(key, msg):
            raise ConfigError(f"{key} {msg}", key=key)

        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            bad("n_elements", "must be a positive integer")
        if int(self.n_uavs) != self.n_uavs or self.n_uavs < 2:
            bad("n_uavs", "must be an integer >= 2")
        if len(self.uav_positions) != self.n_uavs:
            bad("uav_positions", f"has {len(self.uav_positions)} entries, n_uavs={self.n_uavs}")
        if not (0.0 < self.zeta <= 1.0):
            bad("zeta", "out of (0,1]")
        if self.bit_resolution is not None and (
            int(self.bit_resolution) != self.bit_resolution or self.bit_resolution < 1
        ):
            bad("bit_resolution", "must be a positive integer or 'infinite'")
        for key in ("fading_direct_m", "m1", "m2"):
            if getattr(self, key) < 0.5:
                bad(key, "must be >= 0.5")
        for key in ("fading_direct_omega", "omega1", "omega2"):
            if getattr(self, key) <= 0:
                bad(key, "must be > 0")
        for key in ("bandwidth", "carrier", "light_speed"):
            if getattr(self, key) <= 0:
                bad(key, "must be > 0")
        if not (0.0 < self.beta0 <= 1.0):
            bad("beta0", "out of (0,1]")
        for key in ("direct_pathloss", "ris_pathloss"):
            if getattr(self, key) not in PATHLOSS_MODELS:
                bad(key, f"must be one of {PATHLOSS_MODELS}")
        if len(set(self.blocked_uavs)) != len(self.blocked_uavs):
            bad("blocked_uavs", "has duplicate entries")
        if any(not (0 <= b < self.n_uavs) for b in self.blocked_uavs):
            bad("blocked_uavs", "has an index outside [0, n_uavs)")
        if not (0 <= self.rng_seed < 2**64):
            bad("rng_seed", "must fit in an unsigned 64-bit integer")
        if self.mc_trials < 1:
            bad("mc_trials", "must be positive")

    # linear views
    @property
    def ue_power_w(self) -> float:
        return dbm_to_w(self.ue_power_dbm)

    @property
    def uav_power_w(self) -> float:
        return dbm_to_w(self.uav_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_w(self.noise_dbm)

    @property
    def thr_ris_lin(self) -> float:
        return db_to_lin(self.thr_ris_db)

    @property
    def thr_ue_lin(self) -> float:
        return db_to_lin(self.thr_ue_db)

    @property
    def n_nodes(self) -> int:
        return self.n_uavs + 1

    def with_(self, **changes) -> "ScenarioConfig":
        """``dataclasses.replace`` that regenerates UAV positions when K changes."""
        if "n_uavs" in changes and "uav_positions" not in changes:
            k = changes["n_uavs"]
            pos = self.uav_positions
            if k <= len(pos):
                changes["uav_positions"] = pos[:k]
            else:
                extra = default_uav_positions(k, changes.get("rng_seed", self.rng_seed))
                changes["uav_positions"] = pos + extra[len(pos):]
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Position3D):
                v = list(v)
            elif f.name == "uav_positions":
                v = [list(p) for p in v]
            elif f.name == "blocked_uavs":
                v = list(v)
            elif f.name == "bit_resolution" and v is None:
                v = "infinite"
            out[f.name] = v
        return out


def default_uav_positions(k: int, seed: int) -> tuple[Position3D, ...]:
    """UAV_x and UAV_y at the published coordinates plus seeded random extras.

    The extras form a nested sequence: the first ``k - 2`` positions are the
    same for every ``k`` at a fixed seed.
    """
    base = (BASELINE_UAV_X, BASELINE_UAV_Y)
    if k <= 2:
        return base[:k]
    rng = make_rng(seed, 0xA11)
    extra = place_uavs_random(None, k - 2, DEFAULT_UAV_REGION, rng)
    return base + tuple(extra)


def default_scenario() -> ScenarioConfig:
    return ScenarioConfig()


_INT_KEYS = {"n_elements", "n_uavs", "rng_seed", "mc_trials"}
_STR_KEYS = {"direct_pathloss", "ris_pathloss"}
_POS_KEYS = {"ue_position", "ris_position"}


def _as_position(key: str, v) -> Position3D:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"{key} must be an array of 3 numbers", key=key)
    if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
        raise ConfigError(f"{key} must contain only numbers", key=key)
    try:
        return Position3D.of(v)
    except ValueError as e:
        raise ConfigError(f"{key}: {e}", key=key) from None


def _coerce(key: str, v):
    if key in _POS_KEYS:
        return _as_position(key, v)
    if key == "uav_positions":
        if not isinstance(v, list):
            raise ConfigError("uav_positions must be an array of positions", key=key)
        return tuple(_as_position(f"{key}[{i}]", p) for i, p in enumerate(v))
    if key == "blocked_uavs":
        if not isinstance(v, list) or not all(isinstance(b, int) for b in v):
            raise ConfigError("blocked_uavs must be an array of integers", key=key)
        return tuple(v)
    if key == "bit_resolution":
        if isinstance(v, str):
            if v.lower() in ("inf", "infinite"):
                return None
            raise ConfigError(f"bit_resolution: unrecognised value {v!r}", key=key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError("bit_resolution must be an integer or 'infinite'", key=key)
        return v
    if key in _STR_KEYS:
        if not isinstance(v, str):
            raise ConfigError(f"{key} must be a string", key=key)
        return v
    if key in _INT_KEYS:
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{key} must be an integer", key=key)
        return v
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{key} must be a number", key=key)
    return float(v)


def load_scenario(text: str) -> ScenarioConfig:
    """Parse a TOML scenario document; missing keys take default values.

    >>> load_scenario("zeta = 0.3").zeta
    0.3
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"parse error: {e}") from None
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs = {}
    for key, v in doc.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", key=key)
        kwargs[key] = _coerce(key, v)

    if "uav_positions" in kwargs and "n_uavs" not in kwargs:
        kwargs["n_uavs"] = len(kwargs["uav_positions"])
    if "n_uavs" in kwargs and "uav_positions" not in kwargs:
        kwargs["uav_positions"] = default_uav_positions(
            kwargs["n_uavs"], kwargs.get("rng_seed", ScenarioConfig.rng_seed)
        )
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def dump_scenario(config: ScenarioConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def place_uavs_random(
    config: ScenarioConfig | None, count: int, region: Box, rng: np.random.Generator
) -> list[Position3D]:
    """Sample ``count`` positions uniformly inside ``region``.

    ``config`` is accepted for call-site symmetry with the other scenario
    builders and is not consulted.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pts = rng.uniform(region.lo, region.hi, size=(count, 3))
    return [Position3D(*p) for p in pts]


def distance(a, b) -> float:
    return math.dist(tuple(a), tuple(b))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the named sub-stream ``stream`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def positions_array(points: Sequence) -> np.ndarray:
    return np.array([tuple(p) for p in points], dtype=float).reshape(-1, 3)
