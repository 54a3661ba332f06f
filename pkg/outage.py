###########################
# outage.py
# Analytical outage probability under Nakagami fading with co-channel and
# adjacent-channel interference: conditional on the normalized powers,
# averaged over uniform placements, and averaged over log-normal shadowing.
###########################

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from channel import CollisionModel, SystemConfig, WaveformParams, collision_probabilities
from config import (
    DEFAULT_SEED,
    PROBABILITY_SLACK,
    SHADOW_MC_DRAWS,
    SHADOW_QUAD_ELEMENT_BUDGET,
    WORKERS,
)
from exceptions import DomainError, NumericFailure
from numerics import QuadratureSpec, gamma_ratio_table, gauss_2f1, simpson
from simkit import RESAMPLE_ALL, Purpose, RngSpec, simulate_network_outage

logger = logging.getLogger(__name__)

LN10_OVER_10 = math.log(10.0) / 10.0


class OutageMethod(str, enum.Enum):
    CONDITIONAL = "conditional-closed-form"
    UNSHADOWED = "unshadowed-analytic"
    SHADOWED = "shadowed-hybrid"
    MONTE_CARLO = "monte-carlo"

    @property
    def deterministic(self) -> bool:
        return self in (OutageMethod.CONDITIONAL, OutageMethod.UNSHADOWED)


# -------------------------
# Types
# -------------------------
@dataclass(frozen=True)
class ConditionalContext:
    """
    Inputs of the conditional outage: omegas[0] is the source, omegas[1:]
    the interferers. psi is the in-band fraction used for the source and for
    co-channel interferers (1 when splatter is neglected).
    """

    omegas: Tuple[float, ...]
    beta: float
    collision: CollisionModel
    m0: int
    m_i: Tuple[float, ...]
    snr_linear: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        object.__setattr__(self, "m_i", tuple(float(m) for m in self.m_i))
        if int(self.m0) != self.m0 or self.m0 < 1:
            raise DomainError(f"m0 must be a positive integer, got {self.m0}")
        if not self.omegas or self.omegas[0] <= 0:
            raise DomainError("the source power Omega_0 must be > 0")
        if any(w < 0 for w in self.omegas[1:]):
            raise DomainError("interferer powers must be >= 0")
        if self.beta <= 0:
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if len(self.m_i) != len(self.omegas) - 1:
            raise DomainError(f"{len(self.m_i)} Nakagami parameters for {len(self.omegas) - 1} interferers")
        if self.snr_linear <= 0:
            raise DomainError(f"snr_linear must be > 0, got {self.snr_linear}")

    @property
    def M(self) -> int:
        return len(self.omegas) - 1

    @property
    def m_list(self) -> Tuple[float, ...]:
        return self.m_i

    @property
    def beta0(self) -> float:
        return self.beta * self.m0 / (self.psi * self.omegas[0])

    @classmethod
    def from_config(
        cls,
        cfg: SystemConfig,
        wf: WaveformParams,
        beta: float,
        omegas: Sequence[float],
        neglect_aci: bool = False,
    ) -> "ConditionalContext":
        psi, collision = effective_collision(cfg, wf, neglect_aci)
        return cls(
            omegas=tuple(omegas),
            beta=beta,
            collision=collision,
            m0=cfg.m0,
            m_i=cfg.m_list,
            snr_linear=cfg.snr_linear,
            psi=psi,
        )


@dataclass(frozen=True)
class OutageResult:
    value: float
    method: OutageMethod
    mc_std_err: float = 0.0
    trials: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"outage probability {self.value} outside [0, 1]")
        if self.mc_std_err < 0:
            raise DomainError("mc_std_err must be >= 0")
        if self.method.deterministic and (self.mc_std_err != 0 or self.trials != 0):
            raise DomainError(f"{self.method.value} results carry no Monte-Carlo error")

    def to_dict(self) -> Dict[str, object]:
        return {
            "method": self.method.value,
            "value": self.value,
            "std_err": self.mc_std_err,
            "trials": self.trials,
        }


def effective_collision(cfg: SystemConfig, wf: WaveformParams, neglect_aci: bool = False) -> Tuple[float, CollisionModel]:
    """(psi used by the outage expressions, collision model) for a waveform."""
    collision = collision_probabilities(wf.L, cfg.duty_factor, wf.psi)
    if neglect_aci:
        return 1.0, collision_probabilities(wf.L, cfg.duty_factor, 1.0).without_adjacent()
    return wf.psi, collision


def _checked(value: float, args: Tuple) -> float:
    if value < -PROBABILITY_SLACK or value > 1.0 + PROBABILITY_SLACK:
        raise NumericFailure(f"outage probability {value!r} outside [0, 1]", args, best_estimate=value)
    return min(max(value, 0.0), 1.0)


def _inverse_snr(snr_linear: float) -> float:
    return 0.0 if math.isinf(snr_linear) else 1.0 / snr_linear


# -------------------------
# Truncated polynomial algebra for H_k
# -------------------------
def _poly_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Product of coefficient arrays along the last axis, truncated to n terms."""
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (n,))
    for j in range(n):
        for i in range(j + 1):
            out[..., j] += a[..., i] * b[..., j - i]
    return out


def _poly_pow(a: np.ndarray, power: int, n: int) -> np.ndarray:
    result = np.zeros(a.shape[:-1] + (n,))
    result[..., 0] = 1.0
    base = a
    while power:
        if power & 1:
            result = _poly_mul(result, base, n)
        power >>= 1
        if power:
            base = _poly_mul(base, base, n)
    return result


def hk_polynomial(coeffs: Sequence[np.ndarray], n: int, powers: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    H_0..H_{n-1}: coefficients of prod_i sum_l G_l(Omega_i) x^l truncated at
    degree n - 1. `powers` raises each factor to an integer power (groups of
    identical interferers).
    """
    powers = powers or [1] * len(coeffs)
    lead = np.broadcast_shapes(*(np.shape(c)[:-1] for c in coeffs)) if coeffs else ()
    total = np.zeros(lead + (n,))
    total[..., 0] = 1.0
    for c, p in zip(coeffs, powers):
        c = np.asarray(c, dtype=float)[..., :n]
        if c.shape[-1] < n:
            c = np.concatenate([c, np.zeros(c.shape[:-1] + (n - c.shape[-1],))], axis=-1)
        total = _poly_mul(total, _poly_pow(c, p, n) if p != 1 else c, n)
    return total


def hk_fold(per_interferer_coeffs: Sequence[Sequence[float]], k: int) -> float:
    """H_k: sum over index sets adding to k of the product of per-interferer G_l."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    coeffs = [np.asarray(c, dtype=float) for c in per_interferer_coeffs]
    if any(c.shape[-1] <= k for c in coeffs):
        raise DomainError(f"k={k} exceeds the available coefficients")
    return float(hk_polynomial(coeffs, k + 1)[..., k])


# -------------------------
# Conditional outage (closed form)
# -------------------------
def _ccdf(beta0, inv_snr: float, H: np.ndarray) -> np.ndarray:
    """
    e^{-beta0 z} sum_{j<m0} sum_{k<=j} beta0^j z^{j-k} / (j-k)! H_k,
    written with z^{j-k} so that z = 0 (no noise) is exact.
    """
    beta0 = np.asarray(beta0, dtype=float)
    m0 = H.shape[-1]
    total = np.zeros(np.broadcast_shapes(beta0.shape, H.shape[:-1]))
    for j in range(m0):
        inner = np.zeros_like(total)
        for k in range(j + 1):
            inner = inner + inv_snr ** (j - k) / math.factorial(j - k) * H[..., k]
        total = total + beta0 ** j * inner
    return np.exp(-beta0 * inv_snr) * total


def g_coefficients(
    omega,
    m: float,
    collision: CollisionModel,
    beta0,
    psi: float,
    m0: int,
) -> np.ndarray:
    """
    G_0..G_{m0-1} of one interferer with normalized power omega:
    p_n delta_l + Gamma(l+m)/(l! Gamma(m)) [p_c phi(psi) + p_a phi(K_s)].
    """
    omega = np.asarray(omega, dtype=float)[..., None]
    beta0 = np.asarray(beta0, dtype=float)[..., None]
    ell = np.arange(m0, dtype=float)
    ratio = gamma_ratio_table(m, m0)

    def phi(x: float) -> np.ndarray:
        return (x * omega / m) ** ell * (x * beta0 * omega / m + 1.0) ** (-(m + ell))

    g = ratio * (collision.p_c * phi(psi) + collision.p_a * phi(collision.K_s))
    g[..., 0] += collision.p_n
    return g


def conditional_outage(ctx: ConditionalContext) -> OutageResult:
    """Outage probability given the normalized powers Omega (fading and collisions averaged)."""
    beta0 = ctx.beta0
    coeffs = [
        g_coefficients(omega, m, ctx.collision, beta0, ctx.psi, ctx.m0)
        for omega, m in zip(ctx.omegas[1:], ctx.m_i)
    ]
    H = hk_polynomial(coeffs, ctx.m0)
    ccdf = float(_ccdf(beta0, _inverse_snr(ctx.snr_linear), H))
    value = _checked(1.0 - ccdf, (ctx.beta, ctx.m0, ctx.psi))
    return OutageResult(value=value, method=OutageMethod.CONDITIONAL)


# -------------------------
# Spatial average without shadowing
# -------------------------
def _hyp_term(x: float, m: float, ell: int, beta0: float, alpha: float) -> float:
    """I(x) = 2F1(m+l, m+2/alpha; m+2/alpha+1; -m/(x beta0)) / (x^m (m + 2/alpha))."""
    b = m + 2.0 / alpha
    return gauss_2f1(m + ell, b, b + 1.0, -m / (x * beta0)) / (x ** m * b)


def expected_g_unshadowed(
    m: float,
    c: float,
    collision: CollisionModel,
    beta0: float,
    psi: float,
    m0: int,
    r_ex: float,
    r_net: float,
    alpha: float,
) -> np.ndarray:
    """E{G_l} for l < m0 over a uniform position on the annulus (no shadowing)."""
    if r_ex <= 0:
        raise DomainError("the unshadowed spatial average needs r_ex > 0")
    ratio = gamma_ratio_table(m, m0)
    scale = 2.0 / (alpha * (r_net ** 2 - r_ex ** 2)) * m ** m
    expected = np.zeros(m0)
    expected[0] = collision.p_n
    for chi, p in ((psi, collision.p_c), (collision.K_s, collision.p_a)):
        if p == 0:
            continue
        if chi == 0:
            expected[0] += p
            continue
        for ell in range(m0):
            bracket = r_net ** 2 * _hyp_term(chi * c / r_net ** alpha, m, ell, beta0, alpha)
            bracket -= r_ex ** 2 * _hyp_term(chi * c / r_ex ** alpha, m, ell, beta0, alpha)
            expected[ell] += p * ratio[ell] * scale * beta0 ** (-(m + ell)) * bracket
    return expected


def expected_phi_by_quadrature(
    m: float,
    c: float,
    chi: float,
    ell: int,
    beta0: float,
    r_ex: float,
    r_net: float,
    alpha: float,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """
    Reference value of E{Gamma(l+m)/(l! Gamma(m)) phi(chi)} by integrating
    against the annulus pdf of Omega, in log(omega).
    """
    lo, hi = c / r_net ** alpha, c / r_ex ** alpha
    density = 2.0 * c ** (2.0 / alpha) / (alpha * (r_net ** 2 - r_ex ** 2))
    ratio = gamma_ratio_table(m, ell + 1)[ell]

    def integrand(u):
        omega = np.exp(u)
        pdf = density * omega ** (-(1.0 + 2.0 / alpha))
        phi = (chi * omega / m) ** ell * (chi * beta0 * omega / m + 1.0) ** (-(m + ell))
        return pdf * phi * omega

    return ratio * simpson(integrand, math.log(lo), math.log(hi), quad or QuadratureSpec(rel_tol=1e-12, abs_tol=0.0))


def avg_outage_unshadowed(
    cfg: SystemConfig,
    wf: WaveformParams,
    beta: float,
    neglect_aci: bool = False,
    collision: Optional[CollisionModel] = None,
) -> OutageResult:
    """Outage averaged over uniform interferer placements, source at fixed |X0|."""
    if cfg.sigma_s_db > 0:
        raise DomainError("avg_outage_unshadowed requires sigma_s_db = 0")
    if cfg.r_ex <= 0:
        raise DomainError("avg_outage_unshadowed requires r_ex > 0")
    if beta <= 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    psi, default_collision = effective_collision(cfg, wf, neglect_aci)
    collision = collision or default_collision
    beta0 = beta * cfg.m0 / (psi * cfg.omega0)

    groups = cfg.interferer_groups()
    coeffs = [
        expected_g_unshadowed(m, c, collision, beta0, psi, cfg.m0, cfg.r_ex, cfg.r_net, cfg.alpha)
        for (m, c) in groups
    ]
    H = hk_polynomial(coeffs, cfg.m0, list(groups.values()))
    ccdf = float(_ccdf(beta0, _inverse_snr(cfg.snr_linear), H))
    value = _checked(1.0 - ccdf, (beta, wf.as_tuple()))
    logger.debug("[avg_outage_unshadowed] theta=%s beta=%.4g eps=%.6g", wf.as_tuple(), beta, value)
    return OutageResult(value=value, method=OutageMethod.UNSHADOWED)


# -------------------------
# Spatial average with log-normal shadowing
# -------------------------
def _log_knots(cfg: SystemConfig, c: float) -> np.ndarray:
    """Breakpoints in log(omega) covering the bulk of the shadowed annulus pdf."""
    s = cfg.sigma_s_db * LN10_OVER_10
    lo = math.log(c) - cfg.alpha * math.log(cfg.r_net)
    hi = math.log(c) - cfg.alpha * math.log(cfg.r_ex) if cfg.r_ex > 0 else lo + 40.0
    spread = 8.0 * s
    parts = [np.arange(lo - spread, hi + spread, 0.5), [lo, hi, hi + spread]]
    if s < 0.5:
        for edge in (lo, hi):
            parts.append(edge + s * np.arange(-8.0, 8.5))
    return np.unique(np.concatenate([np.asarray(p, dtype=float) for p in parts]))


def _shadowed_pdf_log(omega: np.ndarray, c: float, cfg: SystemConfig) -> np.ndarray:
    """log f_Omega(omega) for an interferer uniform on the annulus with log-normal shadowing."""
    s = cfg.sigma_s_db * LN10_OVER_10
    a = cfg.alpha
    log_w = np.log(omega)

    def arg(r: float) -> np.ndarray:
        if r == 0:
            return np.full_like(log_w, -np.inf)
        return ((log_w + a * math.log(r) - math.log(c)) / s - 2.0 * s / a) / math.sqrt(2.0)

    hi_arg, lo_arg = arg(cfg.r_net), arg(cfg.r_ex)
    # erf(hi) - erf(lo) through erfc where both arguments share a sign
    diff = np.where(
        lo_arg > 0,
        special.erfc(lo_arg) - special.erfc(hi_arg),
        np.where(hi_arg < 0, special.erfc(-hi_arg) - special.erfc(-lo_arg), special.erf(hi_arg) - special.erf(lo_arg)),
    )
    with np.errstate(divide="ignore"):
        log_diff = np.log(np.maximum(diff, 0.0))
    log_const = math.log(math.pi * c ** (2.0 / a) / (a * cfg.area)) + 2.0 * s ** 2 / a ** 2
    return log_const + log_diff - (1.0 + 2.0 / a) * log_w


def _phi_shadowed(
    beta0: np.ndarray,
    chi: float,
    m: float,
    c: float,
    cfg: SystemConfig,
    quad: QuadratureSpec,
) -> np.ndarray:
    """
    Phi(y, chi) for l < m0 and every beta0 = beta m0 / (psi y); shape (len(beta0), m0).

    The semi-infinite omega integral is mapped to t = omega / (1 + omega) in [0, 1],
    split at the images of the log-knots and Simpson-integrated piecewise.
    """
    m0 = cfg.m0
    ell = np.arange(m0, dtype=float)
    ratio = gamma_ratio_table(m, m0)
    knots = np.exp(_log_knots(cfg, c))
    # work with 1 - t = 1 / (1 + omega) to keep precision near t = 1
    q_knots = np.concatenate([[1.0], 1.0 / (1.0 + knots), [0.0]])
    q_start, q_end = q_knots[:-1, None], q_knots[1:, None]
    width = q_start - q_end

    def integrand_for(b0: np.ndarray):
        b0 = b0[:, None, None, None]
        lv = ell[None, :, None, None]

        @np.errstate(divide="ignore", over="ignore", invalid="ignore")
        def f(u: np.ndarray) -> np.ndarray:
            q = q_start + u[None, :] * (q_end - q_start)
            interior = (q > 0.0) & (q < 1.0)
            q_safe = np.where(interior, q, 0.5)
            omega = (1.0 - q_safe) / q_safe
            log_base = _shadowed_pdf_log(omega, c, cfg) + np.log(width / q_safe ** 2)
            log_phi = lv * np.log(chi * omega / m) - (m + lv) * np.log1p(chi * b0 * omega / m)
            values = np.exp(log_base + log_phi)
            return np.where(interior, values, 0.0)

        return f

    segments = len(knots) + 1
    per_draw = m0 * segments * 2 * (quad.panels * 16 + 1)
    chunk = max(1, SHADOW_QUAD_ELEMENT_BUDGET // per_draw)
    out = np.empty((len(beta0), m0))
    for start in range(0, len(beta0), chunk):
        part = simpson(integrand_for(beta0[start:start + chunk]), 0.0, 1.0, quad)
        out[start:start + chunk] = np.sum(part, axis=-1)
    return ratio * out


def avg_outage_shadowed(
    cfg: SystemConfig,
    wf: WaveformParams,
    beta: float,
    mc_draws: int = SHADOW_MC_DRAWS,
    quad: Optional[QuadratureSpec] = None,
    seed: int = DEFAULT_SEED,
    neglect_aci: bool = False,
    collision: Optional[CollisionModel] = None,
) -> OutageResult:
    """
    Outage averaged over placements and log-normal shadowing.

    The source shadowing is sampled (mc_draws draws of xi_0); for each draw
    the interferer expectations Phi(y, chi) are integrated numerically.
    """
    if cfg.sigma_s_db <= 0:
        raise DomainError("avg_outage_shadowed requires sigma_s_db > 0")
    if mc_draws < 1:
        raise DomainError(f"mc_draws must be >= 1, got {mc_draws}")
    if beta <= 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    quad = quad or QuadratureSpec()
    psi, default_collision = effective_collision(cfg, wf, neglect_aci)
    collision = collision or default_collision

    xi0 = RngSpec(seed).generator(Purpose.HYBRID_SOURCE, 0).normal(0.0, cfg.sigma_s_db, mc_draws)
    y = 10.0 ** (xi0 / 10.0) * cfg.omega0
    beta0 = beta * cfg.m0 / (psi * y)

    groups = cfg.interferer_groups()
    coeffs: List[np.ndarray] = []
    for (m, c) in groups:
        g = np.zeros((mc_draws, cfg.m0))
        g[:, 0] = collision.p_n
        for chi, p in ((psi, collision.p_c), (collision.K_s, collision.p_a)):
            if p == 0:
                continue
            if chi == 0:
                g[:, 0] += p
                continue
            g += p * _phi_shadowed(beta0, chi, m, c, cfg, quad)
        coeffs.append(g)

    H = hk_polynomial(coeffs, cfg.m0, list(groups.values())) if coeffs else np.tile(_unit(cfg.m0), (mc_draws, 1))
    ccdf = _ccdf(beta0, _inverse_snr(cfg.snr_linear), H)
    value = _checked(float(1.0 - np.mean(ccdf)), (beta, wf.as_tuple(), mc_draws, seed))
    std_err = float(np.std(ccdf, ddof=1) / math.sqrt(mc_draws)) if mc_draws > 1 else 0.0
    logger.debug("[avg_outage_shadowed] theta=%s beta=%.4g eps=%.6g +- %.2g", wf.as_tuple(), beta, value, std_err)
    return OutageResult(value=value, method=OutageMethod.SHADOWED, mc_std_err=std_err, trials=mc_draws)


def _unit(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    return e


# -------------------------
# Monte-Carlo and dispatch
# -------------------------
def monte_carlo_outage(
    cfg: SystemConfig,
    wf: WaveformParams,
    beta: float,
    trials: int,
    seed: int = DEFAULT_SEED,
    resample=RESAMPLE_ALL,
    neglect_aci: bool = False,
    workers: int = WORKERS,
) -> OutageResult:
    """Empirical outage from the network simulator, wrapped as an OutageResult."""
    psi, collision = effective_collision(cfg, wf, neglect_aci)
    sim_wf = wf if psi == wf.psi else WaveformParams(L=wf.L, R=wf.R, h=wf.h, psi=psi)
    batch = simulate_network_outage(
        cfg, sim_wf, beta, trials, RngSpec(seed), resample=resample, collision=collision, workers=workers
    )
    return OutageResult(
        value=batch.epsilon_hat,
        method=OutageMethod.MONTE_CARLO,
        mc_std_err=batch.std_err,
        trials=batch.trials,
    )


def spatial_outage(
    cfg: SystemConfig,
    wf: WaveformParams,
    beta: float,
    seed: int = DEFAULT_SEED,
    mc_draws: int = SHADOW_MC_DRAWS,
    neglect_aci: bool = False,
    quad: Optional[QuadratureSpec] = None,
) -> OutageResult:
    """Analytic spatial average: shadowed hybrid when sigma_s > 0, closed form otherwise."""
    if cfg.sigma_s_db > 0:
        return avg_outage_shadowed(cfg, wf, beta, mc_draws=mc_draws, quad=quad, seed=seed, neglect_aci=neglect_aci)
    return avg_outage_unshadowed(cfg, wf, beta, neglect_aci=neglect_aci)
