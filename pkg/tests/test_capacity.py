import pytest

from capacity import CapacityResult, link_rate_norm, mctc
from channel import WaveformParams
from config import TABLE1_TAU_SCALE
from cpfsk import spectral_efficiency
from exceptions import DomainError
from optimize import MctcObjective
from outage import OutageMethod, OutageResult


def _eps(value):
    return OutageResult(value=value, method=OutageMethod.UNSHADOWED)


def test_link_rate_uses_spectral_efficiency():
    wf = WaveformParams(L=10, R=0.5, h=0.5, psi=0.99)
    assert link_rate_norm(wf, 1.0) == pytest.approx(0.5 * spectral_efficiency(0.5, 0.99) / 10)


def test_link_rate_with_explicit_efficiency():
    wf = WaveformParams(L=4, R=0.8, h=0.7, psi=0.96)
    assert link_rate_norm(wf, 0.5, eta=2.0) == pytest.approx(0.8 * 0.5 * 2.0 / 4)


@pytest.mark.parametrize("D", [0.0, 1.5])
def test_link_rate_duty_factor_domain(D):
    with pytest.raises(DomainError):
        link_rate_norm(WaveformParams(L=4, R=0.5, h=0.5, psi=0.96), D, eta=1.0)


def test_mctc_combines_density_rate_and_success(unshadowed_cfg, reference_wf):
    result = mctc(unshadowed_cfg, reference_wf, _eps(0.2))
    b_norm = link_rate_norm(reference_wf, unshadowed_cfg.duty_factor)
    assert result.lam == pytest.approx(unshadowed_cfg.density)
    assert result.b_norm == pytest.approx(b_norm)
    assert result.tau_norm == pytest.approx(unshadowed_cfg.density * b_norm * 0.8)
    assert result.epsilon == 0.2


def test_certain_outage_has_zero_capacity(unshadowed_cfg, reference_wf):
    assert mctc(unshadowed_cfg, reference_wf, _eps(1.0)).tau_norm == 0.0


def test_capacity_scales_with_density(unshadowed_cfg, reference_wf):
    sparse = mctc(unshadowed_cfg.replace(M=10), reference_wf, _eps(0.1))
    dense = mctc(unshadowed_cfg, reference_wf, _eps(0.1))
    assert dense.tau_norm / sparse.tau_norm == pytest.approx(5.0)


def test_result_dict_uses_lambda_key():
    data = CapacityResult(tau_norm=0.1, epsilon=0.2, b_norm=0.03, lam=4.0).to_dict()
    assert data == {"tau_norm": 0.1, "epsilon": 0.2, "b_norm": 0.03, "lambda": 4.0}


@pytest.mark.parametrize("field", ["tau_norm", "epsilon", "b_norm", "lam"])
def test_result_rejects_negative_values(field):
    values = dict(tau_norm=0.1, epsilon=0.2, b_norm=0.03, lam=4.0)
    values[field] = -1.0
    with pytest.raises(DomainError):
        CapacityResult(**values)


def test_mctc_needs_finite_bandwidth(unshadowed_cfg):
    with pytest.raises(DomainError):
        mctc(unshadowed_cfg, WaveformParams(L=10, R=0.5, h=0.5, psi=1.0), _eps(0.1))


@pytest.mark.slow
def test_reference_capacity_magnitude(reference_cfg, reference_wf, rate_table):
    tau = MctcObjective(reference_cfg, rate_table, seed=17)(reference_wf)
    assert TABLE1_TAU_SCALE * tau == pytest.approx(22.09, rel=0.10)
