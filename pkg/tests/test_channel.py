import math

import pytest

from channel import (
    CollisionModel,
    Indicator,
    InterfererState,
    SystemConfig,
    WaveformParams,
    collision_probabilities,
    instantaneous_sinr,
    normalized_power,
)
from exceptions import ConfigError, DomainError


# -------------------------
# SystemConfig
# -------------------------
def test_reference_geometry(unshadowed_cfg):
    assert unshadowed_cfg.area == pytest.approx(math.pi * (4.0 - 0.0625))
    assert unshadowed_cfg.density == pytest.approx(50 / unshadowed_cfg.area)
    assert unshadowed_cfg.snr_linear == pytest.approx(10.0)
    assert unshadowed_cfg.omega0 == 1.0


def test_scalar_shorthand_expands(reference_cfg):
    assert reference_cfg.m_list == (1.0,) * 50
    assert reference_cfg.c_list == (1.0,) * 50
    assert reference_cfg.interferer_groups() == {(1.0, 1.0): 50}


def test_per_interferer_values_group():
    cfg = SystemConfig(M=3, r_ex=0.1, r_net=1.0, alpha=3.0, snr_db=10.0, m_i=[1, 2, 1], power_ratios=[1.0, 1.0, 0.5])
    assert cfg.m_i == (1.0, 2.0, 1.0)
    assert cfg.interferer_groups() == {(1.0, 1.0): 1, (2.0, 1.0): 1, (1.0, 0.5): 1}
    assert hash(cfg) == hash(cfg.replace())


@pytest.mark.parametrize(
    "changes",
    [
        {"M": -1},
        {"M": 2.5},
        {"r_ex": 3.0},
        {"alpha": 2.0},
        {"duty_factor": 0.0},
        {"sigma_s_db": -1.0},
        {"m0": 0},
        {"x0_distance": 2.5},
        {"m_i": [1.0, 2.0]},
        {"power_ratios": 0.0},
    ],
)
def test_invalid_system_rejected(reference_cfg, changes):
    with pytest.raises(DomainError):
        reference_cfg.replace(**changes)


def test_from_dict_round_trip(reference_cfg):
    assert SystemConfig.from_dict(reference_cfg.to_dict()) == reference_cfg


def test_from_dict_names_unknown_field():
    with pytest.raises(ConfigError) as info:
        SystemConfig.from_dict({"M": 1, "r_ex": 0.1, "r_nett": 1.0, "alpha": 3, "snr_db": 10})
    assert info.value.field == "system.r_nett"


def test_from_dict_names_missing_field():
    with pytest.raises(ConfigError) as info:
        SystemConfig.from_dict({"M": 1, "r_ex": 0.1, "alpha": 3, "snr_db": 10})
    assert info.value.field == "system.r_net"


def test_from_dict_rejects_strings():
    with pytest.raises(ConfigError) as info:
        WaveformParams.from_dict({"L": "ten", "R": 0.5, "h": 0.5, "psi": 0.96})
    assert info.value.field == "waveform.L"


def test_from_dict_wraps_domain_errors():
    with pytest.raises(ConfigError) as info:
        WaveformParams.from_dict({"L": 10, "R": 1.5, "h": 0.5, "psi": 0.96})
    assert info.value.field == "waveform"


# -------------------------
# WaveformParams
# -------------------------
def test_waveform_splatter():
    assert WaveformParams(L=10, R=0.5, h=0.8, psi=0.96).K_s == pytest.approx(0.02)


@pytest.mark.parametrize("L, expected", [(37.49, 37.0), (37.5, 38.0), (1.2, 1.0)])
def test_waveform_rounding_half_up(L, expected):
    assert WaveformParams(L=L, R=0.5, h=0.5, psi=0.96).rounded().L == expected


@pytest.mark.parametrize("theta", [(0.5, 0.5, 0.5, 0.96), (10, 1.0, 0.5, 0.96), (10, 0.5, 0.0, 0.96), (10, 0.5, 0.5, 0.4)])
def test_invalid_waveform(theta):
    with pytest.raises(DomainError):
        WaveformParams.from_tuple(theta)


# -------------------------
# Collisions
# -------------------------
def test_collision_probabilities_example():
    model = collision_probabilities(L=10, D=1.0, psi=0.96)
    assert model.p_c == pytest.approx(0.1)
    assert model.p_a == pytest.approx(0.18)
    assert model.p_n == pytest.approx(0.72)
    assert model.K_s == pytest.approx(0.02)


def test_single_channel_has_no_neighbours():
    model = collision_probabilities(L=1, D=0.5, psi=0.99)
    assert (model.p_c, model.p_a, model.p_n) == pytest.approx((0.5, 0.0, 0.5))


@pytest.mark.parametrize("L", [1, 2, 7, 200])
@pytest.mark.parametrize("D", [0.1, 1.0])
def test_collision_probabilities_sum_to_one(L, D):
    model = collision_probabilities(L, D, 0.95)
    assert model.probabilities.sum() == pytest.approx(1.0, abs=1e-15)
    assert min(model.probabilities) >= 0.0


def test_without_adjacent_moves_mass_to_no_collision():
    model = collision_probabilities(L=10, D=1.0, psi=0.96).without_adjacent()
    assert model.p_a == 0.0
    assert model.p_n == pytest.approx(0.9)


def test_collision_model_must_sum_to_one():
    with pytest.raises(DomainError):
        CollisionModel(p_c=0.5, p_a=0.5, p_n=0.5, K_s=0.0)


@pytest.mark.parametrize("L, D, psi", [(0.5, 1.0, 0.9), (10, 0.0, 0.9), (10, 1.0, 1.5)])
def test_collision_domain(L, D, psi):
    with pytest.raises(DomainError):
        collision_probabilities(L, D, psi)


def test_indicator_weights():
    assert Indicator.CO_CHANNEL.weight(0.96) == 0.96
    assert Indicator.ADJACENT.weight(0.96) == pytest.approx(0.02)
    assert Indicator.NONE.weight(0.96) == 0.0


# -------------------------
# SINR
# -------------------------
def test_sinr_without_interferers_is_snr_scaled():
    assert instantaneous_sinr(1.0, 1.0, [], psi=0.96, snr_linear=10.0) == pytest.approx(9.6)


def test_sinr_adjacent_example():
    gamma = instantaneous_sinr(1.0, 1.0, [(0.02, 1.0, 1.0)], psi=0.96, snr_linear=10.0)
    assert gamma == pytest.approx(0.96 / 0.12)


def test_sinr_rejects_foreign_weight():
    with pytest.raises(DomainError):
        instantaneous_sinr(1.0, 1.0, [(0.5, 1.0, 1.0)], psi=0.96, snr_linear=10.0)


def test_interferer_state_terms(reference_cfg):
    state = InterfererState.in_network(reference_cfg, 2.0, 10.0, 0.5, Indicator.CO_CHANNEL)
    weight, gain, omega = state.term(c=1.0, alpha=3.0, psi=0.96)
    assert (weight, gain) == (0.96, 0.5)
    assert omega == pytest.approx(10.0 / 8.0)
    assert normalized_power(1.0, 0.0, 2.0, 3.0) == pytest.approx(0.125)


@pytest.mark.parametrize("radius", [0.1, 2.5])
def test_interferer_state_outside_annulus(reference_cfg, radius):
    with pytest.raises(DomainError):
        InterfererState.in_network(reference_cfg, radius, 0.0, 1.0, Indicator.NONE)


def test_interferer_state_on_annulus_edges(reference_cfg):
    inner = InterfererState.in_network(reference_cfg, reference_cfg.r_ex, 0.0, 1.0, Indicator.NONE)
    outer = InterfererState(reference_cfg.r_net, 0.0, 1.0, Indicator.NONE, r_ex=0.25, r_net=reference_cfg.r_net)
    assert (inner.position_radius, outer.position_radius) == (0.25, 2.0)
