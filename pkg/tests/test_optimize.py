import numpy as np
import pytest

from channel import WaveformParams
from config import FADING_MODELS, NM_STEPS, NO_ACI_PSI, REFERENCE_WAVEFORM, TABLE1_TAU_SCALE
from exceptions import DomainError, OptimizationError
from optimize import (
    MctcObjective,
    NelderMeadOptions,
    SearchSpace,
    grid_search,
    nelder_mead,
    profile_curve,
    psi_vs_distance,
)
from validation import optimizer_suite

bowl_center = (25.3, 0.6, 0.7, 0.95)


class Bowl:
    """Concave quadratic in step units with its peak at bowl_center."""

    def __init__(self):
        self.calls = 0

    def __call__(self, wf):
        self.calls += 1
        d = (np.array(wf.as_tuple()) - np.array(bowl_center)) / np.array(NM_STEPS)
        return 1.0 - float(d @ d) / 100.0


class Separable:
    """Depends on L and R only, so h and psi are pure ties."""

    def __call__(self, wf):
        return -((wf.L - 3.0) ** 2) - 10.0 * (wf.R - 0.4) ** 2


class FailsAboveL3:
    def __call__(self, wf):
        if wf.L > 3:
            raise DomainError("unreachable rate")
        return wf.L


def _space(**overrides):
    values = dict(L_values=(1, 2, 3, 4, 5), R_values=(0.2, 0.4, 0.6), h_values=(0.5, 0.7), psi_values=(0.95, 0.97))
    values.update(overrides)
    return SearchSpace(**values)


# -------------------------
# Grid search
# -------------------------
def test_grid_finds_optimum_and_breaks_ties_low(reference_cfg):
    result = grid_search(reference_cfg, _space(), Separable(), workers=1, progress=False)
    assert result.theta_opt.as_tuple() == (3.0, 0.4, 0.5, 0.95)
    assert result.tau_opt == pytest.approx(0.0)
    assert result.evaluations == 60
    assert result.method == "grid"


def test_grid_minimize(reference_cfg):
    result = grid_search(reference_cfg, _space(), Separable(), maximize=False, workers=1, progress=False)
    assert result.theta_opt.L == 1.0
    assert result.theta_opt.R == 0.2


def test_grid_trace_only_records_improvements(reference_cfg):
    result = grid_search(reference_cfg, _space(), Separable(), workers=1, progress=False)
    taus = [entry.tau for entry in result.trace]
    assert taus == sorted(taus)
    assert list(result.trace_frame().columns) == ["iteration", "L", "R", "h", "psi", "tau"]


def test_grid_too_many_failures(reference_cfg):
    with pytest.raises(OptimizationError):
        grid_search(reference_cfg, _space(), FailsAboveL3(), workers=1, progress=False)


def test_search_space_validation():
    with pytest.raises(DomainError):
        _space(R_values=(0.4, 0.2))
    with pytest.raises(DomainError):
        _space(h_values=())


def test_full_search_space_shape():
    space = SearchSpace.full(psi_values=[0.96])
    assert space.L_values[0] == 1 and space.L_values[-1] == 200
    assert space.R_values[0] == 0.01 and space.R_values[-1] == 0.99
    assert space.h_values[-1] == 1.0
    assert space.size == 200 * 99 * 100


# -------------------------
# Nelder-Mead
# -------------------------
def test_nelder_mead_finds_bowl_peak(reference_cfg):
    result = nelder_mead(reference_cfg, Bowl())
    raw = np.array(result.theta_raw.as_tuple())
    assert np.all(np.abs(raw - np.array(bowl_center)) <= 0.2 * np.array(NM_STEPS))
    assert result.theta_opt.L == 25.0
    assert result.tau_opt == pytest.approx(Bowl()(result.theta_opt))
    assert result.method == "nelder-mead"


def test_nelder_mead_trace_is_monotone(reference_cfg):
    result = nelder_mead(reference_cfg, Bowl())
    frame = result.trace_frame()
    assert frame["tau"].is_monotonic_increasing
    assert len(frame) == result.iterations + 1


def test_nelder_mead_respects_fixed_coordinates(reference_cfg):
    result = nelder_mead(reference_cfg, Bowl(), fixed={"L": 10.0, "psi": 0.96})
    assert result.theta_opt.L == 10.0
    assert result.theta_opt.psi == 0.96
    assert result.theta_opt.R == pytest.approx(bowl_center[1], abs=0.2 * NM_STEPS[1])
    assert result.theta_opt.h == pytest.approx(bowl_center[2], abs=0.2 * NM_STEPS[2])


def test_nelder_mead_stays_inside_bounds(reference_cfg):
    options = NelderMeadOptions(bounds=((1.0, 400.0), (0.01, 0.55), (0.01, 0.999), (0.90, 0.999)))
    result = nelder_mead(reference_cfg, Bowl(), options=options)
    assert result.theta_raw.R <= 0.55


def test_nelder_mead_argument_checks(reference_cfg):
    with pytest.raises(DomainError):
        nelder_mead(reference_cfg, Bowl(), fixed={"beta": 1.0})
    with pytest.raises(DomainError):
        nelder_mead(reference_cfg, Bowl(), fixed={"L": 5.0, "R": 0.5, "h": 0.5, "psi": 0.95})


def test_nelder_mead_fails_when_every_corner_fails(reference_cfg):
    with pytest.raises(OptimizationError):
        nelder_mead(reference_cfg, FailsAboveL3())


# -------------------------
# Sweeps
# -------------------------
def test_profile_curve_with_simplex(reference_cfg):
    frame = profile_curve(reference_cfg, "L", [10.0, 30.0], Bowl(), progress=False)
    assert list(frame.columns) == ["L", "R", "h", "psi", "tau_opt"]
    assert frame["L"].tolist() == [10.0, 30.0]
    assert frame["R"].tolist() == pytest.approx([bowl_center[1]] * 2, abs=0.2 * NM_STEPS[1])


def test_profile_curve_with_grid(reference_cfg):
    frame = profile_curve(reference_cfg, "psi", [0.95, 0.97], Separable(), space=_space(), progress=False)
    assert frame["L"].tolist() == [3.0, 3.0]
    assert frame["tau_opt"].tolist() == pytest.approx([0.0, 0.0])


def test_profile_curve_rejects_unknown_coordinate(reference_cfg):
    with pytest.raises(DomainError):
        profile_curve(reference_cfg, "beta", [1.0], Bowl(), progress=False)


def test_psi_vs_distance_rows(reference_cfg):
    frame = psi_vs_distance(reference_cfg, [0.5], [3.0, 4.0], lambda cfg: Bowl(), progress=False)
    assert list(frame.columns) == ["r", "alpha", "L", "R", "h", "psi", "tau_opt"]
    assert frame["alpha"].tolist() == [3.0, 4.0]


def test_psi_vs_distance_domain(reference_cfg):
    with pytest.raises(DomainError):
        psi_vs_distance(reference_cfg, [0.0], [3.0], lambda cfg: Bowl(), progress=False)


# -------------------------
# MCTC objective
# -------------------------
@pytest.fixture
def low_snr_table(make_table):
    return make_table(snr_db_grid=np.arange(-10.0, 0.5, 1.0))


def test_objective_caches_each_theta(unshadowed_cfg, small_table):
    objective = MctcObjective(unshadowed_cfg.replace(M=5), small_table)
    wf = WaveformParams(L=10, R=0.5, h=0.7, psi=0.96)
    first = objective.evaluate(wf)
    assert objective.evaluate(wf) is first
    assert objective.evaluations == 1
    assert objective(wf) == first.tau_norm
    assert 0.0 < first.epsilon < 1.0


def test_unreachable_rate_is_certain_outage(unshadowed_cfg, low_snr_table):
    objective = MctcObjective(unshadowed_cfg.replace(M=5), low_snr_table)
    wf = WaveformParams(L=10, R=0.9, h=0.5, psi=0.96)
    assert objective.beta(wf) is None
    result = objective.evaluate(wf)
    assert (result.epsilon, result.tau_norm) == (1.0, 0.0)


def test_rate_below_table_uses_lowest_sinr(unshadowed_cfg, low_snr_table):
    objective = MctcObjective(unshadowed_cfg.replace(M=5), low_snr_table)
    assert objective.beta(WaveformParams(L=10, R=0.02, h=0.5, psi=0.96)) == pytest.approx(0.1)


def test_neglecting_aci_lowers_outage(unshadowed_cfg, small_table):
    cfg = unshadowed_cfg.replace(M=5)
    wf = WaveformParams(L=10, R=0.5, h=0.7, psi=0.9)
    with_aci = MctcObjective(cfg, small_table).evaluate(wf)
    without = MctcObjective(cfg, small_table, neglect_aci=True).evaluate(wf)
    assert without.epsilon <= with_aci.epsilon


# -------------------------
# Scenarios on the Monte-Carlo rate table
# -------------------------
START = WaveformParams(*REFERENCE_WAVEFORM)


def _optimum(cfg, table, fixed=None, neglect_aci=False, mc_draws=2000):
    objective = MctcObjective(cfg, table, seed=17, mc_draws=mc_draws, neglect_aci=neglect_aci)
    return nelder_mead(cfg, objective, init=START, fixed=fixed)


@pytest.mark.slow
def test_rayleigh_unshadowed_optimum(unshadowed_cfg, rate_table):
    cfg = unshadowed_cfg.replace(**FADING_MODELS["rayleigh"])
    result = _optimum(cfg, rate_table)
    L, R, h, psi = result.theta_opt.as_tuple()
    assert 30 <= L <= 42
    assert 0.58 <= R <= 0.70
    assert 0.76 <= h <= 0.86
    assert 0.945 <= psi <= 0.975
    assert TABLE1_TAU_SCALE * result.tau_opt == pytest.approx(17.74, rel=0.10)


@pytest.mark.slow
def test_moderate_splatter_beats_neglected_and_minimal_splatter(reference_cfg, rate_table):
    moderate = _optimum(reference_cfg, rate_table, fixed={"psi": 0.96}).tau_opt
    neglected = _optimum(reference_cfg, rate_table, fixed={"psi": NO_ACI_PSI}, neglect_aci=True).tau_opt
    minimal = _optimum(reference_cfg, rate_table, fixed={"psi": 0.99}).tau_opt
    assert moderate > neglected > minimal


@pytest.mark.slow
def test_fading_ordering_at_moderate_splatter(unshadowed_cfg, rate_table):
    taus = {
        name: _optimum(unshadowed_cfg.replace(**FADING_MODELS[name]), rate_table, fixed={"psi": 0.96}).tau_opt
        for name in ("rayleigh", "nakagami", "mixed")
    }
    assert taus["mixed"] > taus["nakagami"] > taus["rayleigh"]


@pytest.mark.slow
def test_optimal_psi_grows_with_distance_and_path_loss(unshadowed_cfg, rate_table):
    frame = psi_vs_distance(
        unshadowed_cfg, [0.5, 0.75, 1.0], [3.0, 4.0],
        lambda cfg: MctcObjective(cfg, rate_table), init=START, progress=False,
    )
    step = NM_STEPS[3]
    for _, curve in frame.groupby("alpha"):
        assert np.all(np.diff(curve.sort_values("r")["psi"].to_numpy()) >= -step)
    by_alpha = frame.pivot(index="r", columns="alpha", values="psi")
    assert np.all(by_alpha[4.0] >= by_alpha[3.0] - step)


@pytest.mark.slow
def test_simplex_matches_grid_on_capacity(rate_table):
    checks = optimizer_suite(rate_table)
    assert len(checks) == 4
    assert [check.name for check in checks if not check.passed] == []
