###########################
# capacity.py
# Transmission capacity and the modulation-constrained transmission
# capacity (MCTC) objective tau' = lambda R D eta(h, psi) (1 - eps) / L.
###########################

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

from channel import SystemConfig, WaveformParams
from cpfsk import spectral_efficiency
from exceptions import DomainError
from outage import OutageResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CapacityResult:
    tau_norm: float
    epsilon: float
    b_norm: float
    lam: float

    def __post_init__(self):
        for name in ("tau_norm", "epsilon", "b_norm", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {value}")

    def to_dict(self) -> Dict[str, float]:
        return {"tau_norm": self.tau_norm, "epsilon": self.epsilon, "b_norm": self.b_norm, "lambda": self.lam}


def link_rate_norm(wf: WaveformParams, D: float, eta: Optional[float] = None) -> float:
    """
    b/B = R D eta(h, psi) / L.

    eta defaults to the spectral efficiency of the waveform; pass it to
    override (for instance the bandwidth used when splatter is neglected).
    """
    if not 0 < D <= 1:
        raise DomainError(f"D must lie in (0, 1], got {D}")
    if eta is None:
        eta = spectral_efficiency(wf.h, wf.psi)
    return wf.R * D * eta / wf.L


def mctc(
    cfg: SystemConfig,
    wf: WaveformParams,
    epsilon: OutageResult,
    eta: Optional[float] = None,
) -> CapacityResult:
    """Normalized MCTC tau' = lambda * b/B * (1 - eps) with lambda = M / A."""
    if not 0.0 <= epsilon.value <= 1.0:
        raise DomainError(f"outage probability {epsilon.value} outside [0, 1]")
    lam = cfg.density
    b_norm = link_rate_norm(wf, cfg.duty_factor, eta)
    tau = lam * b_norm * (1.0 - epsilon.value)
    return CapacityResult(tau_norm=tau, epsilon=epsilon.value, b_norm=b_norm, lam=lam)
