import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate, stats

from channel import CollisionModel, SystemConfig, WaveformParams, collision_probabilities
from exceptions import DomainError
from outage import (
    ConditionalContext,
    OutageMethod,
    OutageResult,
    avg_outage_shadowed,
    avg_outage_unshadowed,
    conditional_outage,
    effective_collision,
    expected_g_unshadowed,
    expected_phi_by_quadrature,
    g_coefficients,
    hk_fold,
    hk_polynomial,
    monte_carlo_outage,
    spatial_outage,
)
from simkit import Purpose, RngSpec

BETA = 2.0


def _ctx(omegas, m_i, m0=1, beta=BETA, snr=10.0, L=10, psi=0.96):
    return ConditionalContext(
        omegas=tuple(omegas),
        beta=beta,
        collision=collision_probabilities(L, 1.0, psi),
        m0=m0,
        m_i=tuple(m_i),
        snr_linear=snr,
        psi=psi,
    )


def brute_force_single_interferer(ctx: ConditionalContext) -> float:
    """Outage with one interferer by integrating the Gamma cdf of g0 over the interferer gain."""
    z = 1.0 / ctx.snr_linear
    omega0, omega1 = ctx.omegas
    m1 = ctx.m_i[0]
    F0 = stats.gamma(a=ctx.m0, scale=1.0 / ctx.m0).cdf
    fg = stats.gamma(a=m1, scale=1.0 / m1).pdf
    scale = ctx.beta / (ctx.psi * omega0)
    eps = ctx.collision.p_n * F0(scale * z)
    for weight, p in ((ctx.psi, ctx.collision.p_c), (ctx.collision.K_s, ctx.collision.p_a)):
        value, _ = integrate.quad(lambda g: F0(scale * (z + weight * g * omega1)) * fg(g), 0.0, np.inf, epsabs=1e-13, epsrel=1e-11)
        eps += p * value
    return float(eps)


# -------------------------
# Results and collision handling
# -------------------------
def test_outage_result_validation():
    with pytest.raises(DomainError):
        OutageResult(value=1.5, method=OutageMethod.MONTE_CARLO)
    with pytest.raises(DomainError):
        OutageResult(value=0.5, method=OutageMethod.UNSHADOWED, mc_std_err=0.01)
    assert OutageResult(0.25, OutageMethod.SHADOWED, 0.01, 100).to_dict() == {
        "method": "shadowed-hybrid", "value": 0.25, "std_err": 0.01, "trials": 100,
    }


def test_neglecting_aci_removes_adjacent_collisions(unshadowed_cfg, reference_wf):
    psi, model = effective_collision(unshadowed_cfg, reference_wf, neglect_aci=True)
    assert psi == 1.0
    assert model.p_a == 0.0 and model.K_s == 0.0
    assert model.p_c == pytest.approx(1.0 / reference_wf.L)


# -------------------------
# H_k polynomial
# -------------------------
def test_hk_fold_single_interferer_is_identity():
    g = [0.5, 0.2, 0.1]
    assert [hk_fold([g], k) for k in range(3)] == pytest.approx(g)


def test_hk_fold_two_interferers():
    a, b = [0.5, 0.2, 0.1], [0.7, 0.3, 0.05]
    assert hk_fold([a, b], 1) == pytest.approx(a[0] * b[1] + a[1] * b[0])
    assert hk_fold([a, b], 2) == pytest.approx(a[0] * b[2] + a[1] * b[1] + a[2] * b[0])


def test_hk_group_powers_match_repetition():
    g = np.array([0.6, 0.25, 0.1, 0.02])
    np.testing.assert_allclose(hk_polynomial([g], 4, [5]), hk_polynomial([g] * 5, 4), rtol=1e-14)


def test_hk_fold_beyond_available_terms():
    with pytest.raises(DomainError):
        hk_fold([[0.5, 0.5]], 2)


def test_g_coefficients_sum_to_laplace_transform():
    model = collision_probabilities(4, 1.0, 0.95)
    g = g_coefficients(0.8, 2.0, model, 1.5, 0.95, 1)
    expected = model.p_n + model.p_c * (1 + 0.95 * 1.5 * 0.8 / 2.0) ** -2 + model.p_a * (1 + model.K_s * 1.5 * 0.8 / 2.0) ** -2
    assert g[0] == pytest.approx(expected, rel=1e-14)


# -------------------------
# Conditional outage
# -------------------------
def test_no_interferers_rayleigh_closed_form():
    ctx = _ctx([0.5], [], m0=1)
    expected = 1.0 - math.exp(-BETA / (0.96 * 0.5 * 10.0))
    assert conditional_outage(ctx).value == pytest.approx(expected, rel=1e-14)


def test_no_interferers_no_noise_never_fails():
    assert conditional_outage(_ctx([1.0], [], m0=4, snr=math.inf)).value == 0.0


def test_rayleigh_product_form():
    omegas = [1.0, 0.3, 0.05]
    ctx = _ctx(omegas, [1.0, 1.0], m0=1, L=4)
    c = ctx.collision
    ccdf = math.exp(-BETA * 0.1 / (0.96 * omegas[0]))
    for w in omegas[1:]:
        ccdf *= c.p_n + c.p_c / (1 + BETA * w / omegas[0]) + c.p_a / (1 + BETA * c.K_s * w / (0.96 * omegas[0]))
    assert conditional_outage(ctx).value == pytest.approx(1.0 - ccdf, rel=1e-12)


@pytest.mark.parametrize("m0, m1", [(1, 1.5), (2, 1.0), (4, 1.0), (4, 4.0), (3, 2.5)])
def test_conditional_matches_gamma_cdf_integration(m0, m1):
    ctx = _ctx([1.0, 0.4], [m1], m0=m0, L=3)
    assert conditional_outage(ctx).value == pytest.approx(brute_force_single_interferer(ctx), abs=1e-9)


def test_conditional_psi_one_drops_adjacent_terms():
    ctx = _ctx([1.0, 0.4, 0.2, 0.9], [1.0, 2.0, 1.0], m0=4, psi=1.0)
    bare = dataclasses.replace(ctx, collision=ctx.collision.without_adjacent())
    assert conditional_outage(ctx).value == pytest.approx(conditional_outage(bare).value, rel=1e-12)


def test_conditional_increases_with_threshold():
    values = [conditional_outage(_ctx([1.0, 0.4, 0.2], [1.0, 1.0], m0=4, beta=b)).value for b in (0.5, 1.0, 2.0, 4.0)]
    assert values == sorted(values)


def test_context_validation():
    with pytest.raises(DomainError):
        _ctx([0.0], [])
    with pytest.raises(DomainError):
        _ctx([1.0, 0.2], [])
    with pytest.raises(DomainError):
        _ctx([1.0], [], beta=0.0)


# -------------------------
# Spatial average without shadowing
# -------------------------
@pytest.mark.parametrize("m, alpha", [(1.0, 3.0), (2.0, 3.5), (2.5, 4.0)])
@pytest.mark.parametrize("ell", [0, 1, 3])
def test_closed_form_matches_annulus_quadrature(m, alpha, ell):
    only_co = CollisionModel(p_c=1.0, p_a=0.0, p_n=0.0, K_s=0.0)
    closed = expected_g_unshadowed(m, 1.0, only_co, 1.7, 0.96, 4, 0.25, 2.0, alpha)[ell]
    quad = expected_phi_by_quadrature(m, 1.0, 0.96, ell, 1.7, 0.25, 2.0, alpha)
    assert closed == pytest.approx(quad, rel=1e-8)


def test_single_interferer_average_matches_radial_integration():
    cfg = SystemConfig(M=1, r_ex=0.25, r_net=2.0, alpha=3.0, snr_db=10.0, m0=3, m_i=2.0)
    wf = WaveformParams(L=3, R=0.5, h=0.8, psi=0.95)
    area = cfg.r_net ** 2 - cfg.r_ex ** 2

    def conditional_at(r):
        ctx = ConditionalContext.from_config(cfg, wf, BETA, (cfg.omega0, r ** -cfg.alpha))
        return conditional_outage(ctx).value * 2.0 * r / area

    expected, _ = integrate.quad(conditional_at, cfg.r_ex, cfg.r_net, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert avg_outage_unshadowed(cfg, wf, BETA).value == pytest.approx(expected, abs=1e-9)


def test_unshadowed_psi_one_drops_adjacent_terms(unshadowed_cfg):
    wf = WaveformParams(L=38, R=0.64, h=0.81, psi=1.0)
    full = avg_outage_unshadowed(unshadowed_cfg, wf, BETA).value
    model = collision_probabilities(wf.L, 1.0, 1.0).without_adjacent()
    assert avg_outage_unshadowed(unshadowed_cfg, wf, BETA, collision=model).value == pytest.approx(full, rel=1e-12)


def test_unshadowed_neglect_aci_equals_psi_one(unshadowed_cfg, reference_wf):
    neglect = avg_outage_unshadowed(unshadowed_cfg, reference_wf, BETA, neglect_aci=True).value
    wf_one = WaveformParams(L=reference_wf.L, R=reference_wf.R, h=reference_wf.h, psi=1.0)
    model = collision_probabilities(wf_one.L, 1.0, 1.0).without_adjacent()
    assert neglect == avg_outage_unshadowed(unshadowed_cfg, wf_one, BETA, collision=model).value


def test_more_channels_less_outage(unshadowed_cfg):
    values = [avg_outage_unshadowed(unshadowed_cfg, WaveformParams(L=L, R=0.6, h=0.8, psi=0.96), BETA).value for L in (1, 5, 20, 80)]
    assert values == sorted(values, reverse=True)


def test_unshadowed_preconditions(reference_cfg, unshadowed_cfg, reference_wf):
    with pytest.raises(DomainError):
        avg_outage_unshadowed(reference_cfg, reference_wf, BETA)
    with pytest.raises(DomainError):
        avg_outage_unshadowed(unshadowed_cfg.replace(r_ex=0.0), reference_wf, BETA)


def test_spatial_outage_dispatch(unshadowed_cfg, reference_wf):
    assert spatial_outage(unshadowed_cfg, reference_wf, BETA).method is OutageMethod.UNSHADOWED


# -------------------------
# Spatial average with shadowing
# -------------------------
def test_light_shadowing_approaches_unshadowed(unshadowed_cfg, reference_wf):
    light = avg_outage_shadowed(unshadowed_cfg.replace(sigma_s_db=0.1), reference_wf, BETA, mc_draws=200, seed=5)
    none = avg_outage_unshadowed(unshadowed_cfg, reference_wf, BETA)
    assert light.value == pytest.approx(none.value, abs=5e-3)
    assert light.method is OutageMethod.SHADOWED and light.trials == 200


def test_shadowed_is_deterministic_per_seed(reference_cfg, reference_wf):
    a = avg_outage_shadowed(reference_cfg, reference_wf, BETA, mc_draws=32, seed=11)
    b = avg_outage_shadowed(reference_cfg, reference_wf, BETA, mc_draws=32, seed=11)
    assert a == b
    assert 0.0 < a.value < 1.0 and a.mc_std_err > 0.0


def test_shadowed_source_draws_are_independent_of_the_simulator(reference_cfg, reference_wf, monkeypatch):
    used = []
    generator = RngSpec.generator

    def recording(self, purpose, block=0):
        used.append(Purpose(purpose))
        return generator(self, purpose, block)

    monkeypatch.setattr(RngSpec, "generator", recording)
    avg_outage_shadowed(reference_cfg, reference_wf, BETA, mc_draws=8, seed=11)
    assert used == [Purpose.HYBRID_SOURCE]


def test_shadowed_psi_one_drops_adjacent_terms(reference_cfg):
    wf = WaveformParams(L=38, R=0.64, h=0.81, psi=1.0)
    model = collision_probabilities(wf.L, 1.0, 1.0)
    full = avg_outage_shadowed(reference_cfg, wf, BETA, mc_draws=16, seed=3, collision=model).value
    bare = avg_outage_shadowed(reference_cfg, wf, BETA, mc_draws=16, seed=3, collision=model.without_adjacent()).value
    assert full == pytest.approx(bare, rel=1e-12)


def test_shadowed_preconditions(unshadowed_cfg, reference_cfg, reference_wf):
    with pytest.raises(DomainError):
        avg_outage_shadowed(unshadowed_cfg, reference_wf, BETA)
    with pytest.raises(DomainError):
        avg_outage_shadowed(reference_cfg, reference_wf, BETA, mc_draws=0)


# -------------------------
# Monte-Carlo agreement
# -------------------------
def test_monte_carlo_agrees_with_unshadowed_average(unshadowed_cfg, reference_wf):
    analytic = avg_outage_unshadowed(unshadowed_cfg, reference_wf, BETA).value
    mc = monte_carlo_outage(unshadowed_cfg, reference_wf, BETA, trials=40_000, seed=21, workers=1)
    assert mc.method is OutageMethod.MONTE_CARLO
    assert abs(mc.value - analytic) <= 4 * mc.mc_std_err


@pytest.mark.slow
def test_monte_carlo_agrees_with_shadowed_hybrid(reference_cfg, reference_wf):
    hybrid = avg_outage_shadowed(reference_cfg, reference_wf, BETA, mc_draws=2000, seed=8)
    mc = monte_carlo_outage(reference_cfg, reference_wf, BETA, trials=100_000, seed=9, workers=1)
    combined = math.hypot(mc.mc_std_err, hybrid.mc_std_err)
    assert abs(mc.value - hybrid.value) <= max(3 * combined, 0.01)
