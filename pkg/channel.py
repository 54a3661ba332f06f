###########################
# channel.py
# Network geometry, fading/shadowing parameters and the frequency-hopping
# collision model (co-channel and adjacent-channel).
###########################

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import ConfigError, DomainError

logger = logging.getLogger(__name__)

FloatOrSeq = Union[float, Sequence[float]]


# -------------------------
# System configuration
# -------------------------
@dataclass(frozen=True)
class SystemConfig:
    """
    Physical and network parameters.

    Powers enter only through the SNR (snr_db, which already folds in the
    reference distance, source power and noise) and the ratios c_i = P_i / P_0.
    m_i and power_ratios accept a scalar shorthand or one value per interferer.
    """

    M: int
    r_ex: float
    r_net: float
    alpha: float
    snr_db: float
    duty_factor: float = 1.0
    sigma_s_db: float = 0.0
    m0: int = 1
    m_i: FloatOrSeq = 1.0
    power_ratios: Optional[FloatOrSeq] = None
    x0_distance: float = 1.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise DomainError(f"M must be a non-negative integer, got {self.M}")
        if self.r_ex < 0:
            raise DomainError(f"r_ex must be >= 0, got {self.r_ex}")
        if not self.r_ex < self.r_net:
            raise DomainError(f"r_ex ({self.r_ex}) must be < r_net ({self.r_net})")
        if not self.alpha > 2:
            raise DomainError(f"alpha must be > 2, got {self.alpha}")
        if not 0 < self.duty_factor <= 1:
            raise DomainError(f"duty_factor must lie in (0, 1], got {self.duty_factor}")
        if self.sigma_s_db < 0:
            raise DomainError(f"sigma_s_db must be >= 0, got {self.sigma_s_db}")
        if int(self.m0) != self.m0 or self.m0 < 1:
            raise DomainError(f"m0 must be a positive integer, got {self.m0}")
        if not 0 < self.x0_distance <= self.r_net:
            raise DomainError(f"x0_distance must lie in (0, r_net], got {self.x0_distance}")
        if math.isnan(self.snr_db):
            raise DomainError("snr_db must not be NaN")

        # normalise list-valued fields to tuples so the config stays hashable
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "m0", int(self.m0))
        if not np.isscalar(self.m_i):
            object.__setattr__(self, "m_i", tuple(float(v) for v in self.m_i))
        if self.power_ratios is not None and not np.isscalar(self.power_ratios):
            object.__setattr__(self, "power_ratios", tuple(float(v) for v in self.power_ratios))

        if any(m <= 0 for m in self.m_list):
            raise DomainError("every m_i must be positive")
        if any(c <= 0 for c in self.c_list):
            raise DomainError("every power ratio c_i must be positive")

    # ---------- derived quantities ----------
    @property
    def area(self) -> float:
        return math.pi * (self.r_net ** 2 - self.r_ex ** 2)

    @property
    def density(self) -> float:
        """Interferer density lambda = M / A."""
        return self.M / self.area

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def omega0(self) -> float:
        """Normalized source power without shadowing, |X0|^-alpha."""
        return self.x0_distance ** (-self.alpha)

    @property
    def m_list(self) -> Tuple[float, ...]:
        return _expand(self.m_i, self.M, "m_i")

    @property
    def c_list(self) -> Tuple[float, ...]:
        if self.power_ratios is None:
            return (1.0,) * self.M
        return _expand(self.power_ratios, self.M, "power_ratios")

    def interferer_groups(self) -> Dict[Tuple[float, float], int]:
        """Count of interferers sharing each (m_i, c_i) pair, in first-seen order."""
        groups: Dict[Tuple[float, float], int] = {}
        for key in zip(self.m_list, self.c_list):
            groups[key] = groups.get(key, 0) + 1
        return groups

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        for key in ("m_i", "power_ratios"):
            if isinstance(data[key], tuple):
                data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], prefix: str = "system") -> "SystemConfig":
        return _build(cls, data, prefix)


def _expand(value: FloatOrSeq, count: int, name: str) -> Tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * count
    values = tuple(float(v) for v in value)
    if len(values) != count:
        raise DomainError(f"{name} has {len(values)} entries but M = {count}")
    return values


# -------------------------
# Waveform parameters
# -------------------------
@dataclass(frozen=True)
class WaveformParams:
    """theta = (L, R, h, psi). L may be real-valued while optimizing."""

    L: float
    R: float
    h: float
    psi: float

    def __post_init__(self):
        if not self.L >= 1:
            raise DomainError(f"L must be >= 1, got {self.L}")
        if not 0 < self.R < 1:
            raise DomainError(f"R must lie in (0, 1), got {self.R}")
        if not 0 < self.h <= 1:
            raise DomainError(f"h must lie in (0, 1], got {self.h}")
        if not 0.5 < self.psi <= 1:
            raise DomainError(f"psi must lie in (0.5, 1], got {self.psi}")

    @property
    def K_s(self) -> float:
        return (1.0 - self.psi) / 2.0

    def rounded(self) -> "WaveformParams":
        """Same waveform with L rounded half-up to an integer."""
        return dataclasses.replace(self, L=float(math.floor(self.L + 0.5)))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.L, self.R, self.h, self.psi)

    def to_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)

    @classmethod
    def from_tuple(cls, theta: Iterable[float]) -> "WaveformParams":
        L, R, h, psi = (float(v) for v in theta)
        return cls(L=L, R=R, h=h, psi=psi)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], prefix: str = "waveform") -> "WaveformParams":
        return _build(cls, data, prefix)


def _build(cls, data: Dict[str, Any], prefix: str):
    """Construct a frozen dataclass from a mapping, rejecting unknown or missing fields."""
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", field=prefix)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in fields:
            raise ConfigError("unknown field", field=f"{prefix}.{key}")
    for name, f in fields.items():
        no_default = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if no_default and name not in data:
            raise ConfigError("missing required field", field=f"{prefix}.{name}")
    for key, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float, list, type(None))):
            raise ConfigError(f"expected a number, got {value!r}", field=f"{prefix}.{key}")
    try:
        return cls(**data)
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc), field=prefix) from exc


# -------------------------
# Collision model
# -------------------------
class Indicator(enum.Enum):
    """Interference indicator I_i of an interferer during one hop."""

    CO_CHANNEL = "co-channel"
    ADJACENT = "adjacent"
    NONE = "none"

    def weight(self, psi: float) -> float:
        if self is Indicator.CO_CHANNEL:
            return psi
        if self is Indicator.ADJACENT:
            return (1.0 - psi) / 2.0
        return 0.0


@dataclass(frozen=True)
class CollisionModel:
    p_c: float
    p_a: float
    p_n: float
    K_s: float

    def __post_init__(self):
        for name in ("p_c", "p_a", "p_n"):
            value = getattr(self, name)
            if not -1e-15 <= value <= 1 + 1e-15:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.p_c + self.p_a + self.p_n - 1.0) > 1e-12:
            raise DomainError("collision probabilities must sum to 1")

    @property
    def probabilities(self) -> np.ndarray:
        """(p_c, p_a, p_n) in Indicator order."""
        return np.array([self.p_c, self.p_a, self.p_n])

    def without_adjacent(self) -> "CollisionModel":
        """Spectral splatter neglected: adjacent collisions count as no collision."""
        return CollisionModel(p_c=self.p_c, p_a=0.0, p_n=1.0 - self.p_c, K_s=self.K_s)


def collision_probabilities(L: float, D: float, psi: float) -> CollisionModel:
    """
    Per-interferer collision probabilities for L hopping channels and duty factor D.

    An edge channel has one neighbour, every other channel two, so an active
    interferer lands next to the source with probability 2(L - 1)/L^2.
    """
    if not L >= 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if not 0 < D <= 1:
        raise DomainError(f"D must lie in (0, 1], got {D}")
    if not 0 <= psi <= 1:
        raise DomainError(f"psi must lie in [0, 1], got {psi}")
    p_c = D / L
    p_a = 2.0 * D * (L - 1.0) / L ** 2
    return CollisionModel(p_c=p_c, p_a=p_a, p_n=1.0 - p_c - p_a, K_s=(1.0 - psi) / 2.0)


# -------------------------
# Per-interferer state and SINR
# -------------------------
@dataclass(frozen=True)
class InterfererState:
    """One interferer realization; position_radius lies in the annulus [r_ex, r_net]."""

    position_radius: float
    shadow_db: float
    fading_gain: float
    indicator: Indicator
    r_ex: float
    r_net: float

    def __post_init__(self):
        if self.fading_gain < 0:
            raise DomainError(f"fading_gain must be >= 0, got {self.fading_gain}")
        if not 0 < self.r_ex <= self.r_net:
            raise DomainError(f"annulus needs 0 < r_ex <= r_net, got ({self.r_ex}, {self.r_net})")
        if not self.r_ex <= self.position_radius <= self.r_net:
            raise DomainError(
                f"position_radius {self.position_radius} outside the annulus [{self.r_ex}, {self.r_net}]"
            )

    @classmethod
    def in_network(
        cls, cfg: SystemConfig, position_radius: float, shadow_db: float, fading_gain: float, indicator: Indicator
    ) -> "InterfererState":
        return cls(position_radius, shadow_db, fading_gain, indicator, r_ex=cfg.r_ex, r_net=cfg.r_net)

    def omega(self, c: float, alpha: float) -> float:
        return normalized_power(c, self.shadow_db, self.position_radius, alpha)

    def term(self, c: float, alpha: float, psi: float) -> Tuple[float, float, float]:
        """(I_i weight, g_i, Omega_i) as consumed by instantaneous_sinr."""
        return (self.indicator.weight(psi), self.fading_gain, self.omega(c, alpha))


def normalized_power(c_i: float, shadow_db: float, distance: float, alpha: float) -> float:
    """Omega_i = c_i * 10^(xi_i/10) * |X_i|^-alpha."""
    if distance <= 0:
        raise DomainError(f"distance must be > 0, got {distance}")
    return c_i * 10.0 ** (shadow_db / 10.0) * distance ** (-alpha)


def instantaneous_sinr(
    g0: float,
    omega0: float,
    interferers: Sequence[Tuple[float, float, float]],
    psi: float,
    snr_linear: float,
) -> float:
    """gamma = psi g0 Omega0 / (1/SNR + sum I_i g_i Omega_i)."""
    if snr_linear <= 0:
        raise DomainError(f"snr_linear must be > 0, got {snr_linear}")
    k_s = (1.0 - psi) / 2.0
    interference = 0.0
    for weight, gain, omega in interferers:
        if not any(math.isclose(weight, w, rel_tol=1e-12, abs_tol=1e-15) for w in (psi, k_s, 0.0)):
            raise DomainError(f"indicator weight {weight} is not one of psi, K_s or 0")
        interference += weight * gain * omega
    return psi * g0 * omega0 / (1.0 / snr_linear + interference)
