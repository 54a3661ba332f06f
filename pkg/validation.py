###########################
# validation.py
# Self-check suites run by `fhaci validate`: numerical identities,
# psi = 1 specialization, Monte-Carlo oracle agreement and optimizer soundness.
###########################

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import integrate, special

from channel import CollisionModel, SystemConfig, WaveformParams, collision_probabilities
from config import DEFAULT_SEED, REFERENCE_SYSTEM, REFERENCE_WAVEFORM, VALIDATION_TRIALS
from cpfsk import RateThresholdTable, fractional_power_bandwidth
from numerics import erf, gauss_2f1, log_gamma_ratio, simpson
from optimize import MctcObjective, NelderMeadOptions, SearchSpace, grid_search, nelder_mead
from outage import (
    ConditionalContext,
    avg_outage_shadowed,
    avg_outage_unshadowed,
    conditional_outage,
    expected_g_unshadowed,
    expected_phi_by_quadrature,
)
from simkit import RngSpec, draw_fixed_omegas, simulate_conditional_outage, simulate_network_outage

logger = logging.getLogger(__name__)

SUITES = ("numerics", "specialization", "oracle", "optimizer")
ANCHOR_BETA = 10.0 ** 0.37


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    expected: float
    tolerance: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "expected": float(self.expected),
            "tolerance": float(self.tolerance),
        }


def _close(name: str, value: float, expected: float, tol: float, relative: bool = False) -> Check:
    error = abs(value - expected)
    if relative:
        error /= max(abs(expected), 1e-300)
    return Check(name, bool(error <= tol), value, expected, tol)


def _sigma(name: str, value: float, expected: float, std_err: float, floor: float = 0.0) -> Check:
    tol = max(3.0 * std_err, floor)
    return Check(name, bool(abs(value - expected) <= tol), value, expected, tol)


def _reference_cfg(**overrides) -> SystemConfig:
    return SystemConfig(**{**REFERENCE_SYSTEM, **overrides})


def _reference_beta(table: Optional[RateThresholdTable], wf: WaveformParams) -> float:
    if table is None:
        logger.info("[validation] no rate table, using the 3.7 dB anchor threshold")
        return ANCHOR_BETA
    return table.sinr_threshold(wf.R, wf.h)


def _euler_2f1(a: float, b: float, c: float, z: float) -> float:
    """2F1 from its Euler integral (c > b > 0), an oracle independent of the series paths."""
    scale = math.exp(special.gammaln(c) - special.gammaln(b) - special.gammaln(c - b))
    points = [1.0 / abs(z)] if abs(z) > 1.0 else None
    value, _ = integrate.quad(
        lambda t: t ** (b - 1) * (1 - t) ** (c - b - 1) * (1 - z * t) ** (-a),
        0.0, 1.0, points=points, epsabs=0.0, epsrel=1e-12, limit=400,
    )
    return scale * value


# -------------------------
# Suites
# -------------------------
def numerics_suite(**_) -> List[Check]:
    checks = [
        _close("2F1 at z=0", gauss_2f1(1.7, 2.3, 3.1, 0.0), 1.0, 0.0),
        _close("2F1(1,1;2;-1) = ln 2", gauss_2f1(1.0, 1.0, 2.0, -1.0), math.log(2.0), 1e-10, True),
        _close("2F1(2.5,1.5;2.5;-4) = 5^-1.5", gauss_2f1(2.5, 1.5, 2.5, -4.0), 5.0 ** -1.5, 1e-10, True),
        _close("2F1 symmetry", gauss_2f1(2.3, 1.7, 3.1, -7.5), gauss_2f1(1.7, 2.3, 3.1, -7.5), 1e-12, True),
        _close("simpson x^2", simpson(lambda x: x ** 2, 0.0, 1.0), 1.0 / 3.0, 1e-14),
        _close("simpson sin", simpson(np.sin, 0.0, math.pi), 2.0, 1e-8),
        _close("erf(1)", erf(1.0), 0.8427007929497149, 1e-12),
        _close("gamma ratio (3, 4)", log_gamma_ratio(3, 4.0), 20.0, 1e-12, True),
        _close("bandwidth W(0.5, 0.99)", fractional_power_bandwidth(0.5, 0.99), 1.18, 0.02),
    ]
    rng = np.random.default_rng(DEFAULT_SEED)
    for _ in range(10):
        a, b = rng.uniform(1.0, 6.0, 2)
        c = b + 1.0
        z = -float(10.0 ** rng.uniform(-2.0, 4.0))
        checks.append(_close(f"2F1({a:.3f},{b:.3f};{c:.3f};{z:.4g}) vs Euler integral", gauss_2f1(a, b, c, z), _euler_2f1(a, b, c, z), 1e-9, True))

    # closed-form spatial expectation against direct integration over the annulus pdf
    co_channel_only = CollisionModel(p_c=1.0, p_a=0.0, p_n=0.0, K_s=0.0)
    for _ in range(50):
        m = float(rng.choice([1.0, 2.0, 4.0, 2.5]))
        m0 = 4
        ell = int(rng.integers(0, m0))
        beta0 = float(10.0 ** rng.uniform(-1.0, 1.5))
        c = float(10.0 ** rng.uniform(-0.5, 0.5))
        r_ex = float(rng.uniform(0.1, 0.5))
        r_net = float(rng.uniform(1.0, 4.0))
        alpha = float(rng.uniform(2.5, 4.5))
        closed = expected_g_unshadowed(m, c, co_channel_only, beta0, 0.96, m0, r_ex, r_net, alpha)[ell]
        quad = expected_phi_by_quadrature(m, c, 0.96, ell, beta0, r_ex, r_net, alpha)
        checks.append(_close(f"E[G_{ell}] closed form vs quadrature (m={m}, alpha={alpha:.2f})", closed, quad, 1e-8, True))
    return checks


def specialization_suite(draws: int = 64, seed: int = DEFAULT_SEED, **_) -> List[Check]:
    """With psi = 1 every analytic path must match the same computation without adjacent collisions."""
    wf = WaveformParams(L=38.0, R=0.64, h=0.81, psi=1.0)
    checks = []
    for shadowed in (False, True):
        cfg = _reference_cfg(sigma_s_db=8.0 if shadowed else 0.0)
        collision = collision_probabilities(wf.L, cfg.duty_factor, wf.psi)
        stripped = collision.without_adjacent()
        if shadowed:
            full = avg_outage_shadowed(cfg, wf, ANCHOR_BETA, mc_draws=draws, seed=seed, collision=collision).value
            bare = avg_outage_shadowed(cfg, wf, ANCHOR_BETA, mc_draws=draws, seed=seed, collision=stripped).value
        else:
            full = avg_outage_unshadowed(cfg, wf, ANCHOR_BETA, collision=collision).value
            bare = avg_outage_unshadowed(cfg, wf, ANCHOR_BETA, collision=stripped).value
        checks.append(_close(f"psi=1 {'shadowed' if shadowed else 'unshadowed'} average", full, bare, 1e-12, True))

    cfg = _reference_cfg(sigma_s_db=0.0, M=3)
    omega0, omegas = draw_fixed_omegas(cfg, RngSpec(seed))
    ctx = ConditionalContext.from_config(cfg, wf, ANCHOR_BETA, (omega0,) + omegas)
    bare_ctx = dataclasses.replace(ctx, collision=ctx.collision.without_adjacent())
    checks.append(_close("psi=1 conditional", conditional_outage(ctx).value, conditional_outage(bare_ctx).value, 1e-12, True))
    return checks


def oracle_suite(
    trials: int = VALIDATION_TRIALS,
    mc_draws: int = 2000,
    seed: int = DEFAULT_SEED,
    table: Optional[RateThresholdTable] = None,
    workers: int = 1,
    **_,
) -> List[Check]:
    """Analytic outage against the simulator at 3 standard errors."""
    wf = WaveformParams(*REFERENCE_WAVEFORM)
    beta = _reference_beta(table, wf)
    rng = RngSpec(seed)
    checks = []

    cfg = _reference_cfg(M=3, sigma_s_db=0.0)
    omega0, omegas = draw_fixed_omegas(cfg, rng)
    ctx = ConditionalContext.from_config(cfg, wf, beta, (omega0,) + omegas)
    analytic = conditional_outage(ctx).value
    sim = simulate_conditional_outage(ctx, trials, rng, workers=workers)
    checks.append(_sigma("conditional, mixed fading, M=3", sim.epsilon_hat, analytic, sim.std_err))

    cfg = _reference_cfg(sigma_s_db=0.0)
    analytic = avg_outage_unshadowed(cfg, wf, beta).value
    sim = simulate_network_outage(cfg, wf, beta, trials, rng, workers=workers)
    checks.append(_sigma("unshadowed spatial average", sim.epsilon_hat, analytic, sim.std_err))

    cfg = _reference_cfg(sigma_s_db=8.0)
    hybrid = avg_outage_shadowed(cfg, wf, beta, mc_draws=mc_draws, seed=seed)
    sim = simulate_network_outage(cfg, wf, beta, trials, rng, workers=workers)
    combined = math.hypot(sim.std_err, hybrid.mc_std_err)
    checks.append(_sigma("shadowed hybrid", sim.epsilon_hat, hybrid.value, combined, floor=0.01))
    return checks


def optimizer_suite(table: Optional[RateThresholdTable] = None, seed: int = DEFAULT_SEED, **_) -> List[Check]:
    """Nelder-Mead against a coarse exhaustive grid on a reduced Rayleigh, unshadowed system."""
    if table is None:
        return [Check("optimizer suite needs a rate table", False, math.nan, math.nan, 0.0)]
    cfg = _reference_cfg(M=10, m0=1, m_i=1.0, sigma_s_db=0.0)
    objective = MctcObjective(cfg, table, seed=seed)
    space = SearchSpace(
        L_values=tuple(range(1, 31)),
        R_values=tuple(np.round(np.arange(0.30, 0.951, 0.05), 2)),
        h_values=tuple(np.round(np.arange(0.50, 0.951, 0.05), 2)),
        psi_values=tuple(np.round(np.arange(0.93, 0.9951, 0.01), 3)),
    )
    steps = (1.0, 0.05, 0.05, 0.01)
    grid = grid_search(cfg, space, objective, progress=False)
    simplex = nelder_mead(cfg, objective, options=NelderMeadOptions(initial=(10.0, 0.5, 0.5, 0.975)))
    checks = []
    for name, step, a, b in zip(("L", "R", "h", "psi"), steps, simplex.theta_opt.as_tuple(), grid.theta_opt.as_tuple()):
        checks.append(_close(f"nelder-mead {name} within one grid step", a, b, step + 1e-9))
    return checks


SUITE_FUNCS: Dict[str, Callable[..., List[Check]]] = {
    "numerics": numerics_suite,
    "specialization": specialization_suite,
    "oracle": oracle_suite,
    "optimizer": optimizer_suite,
}


def run_suite(name: str, **kwargs) -> List[Check]:
    checks = SUITE_FUNCS[name](**kwargs)
    for check in checks:
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, f"[validate:{name}] {'PASS' if check.passed else 'FAIL'} {check.name}: "
                          f"{check.value:.10g} vs {check.expected:.10g} (tol {check.tolerance:.3g})")
    return checks
