###########################
# tests/conftest.py
# Shared fixtures: reference systems, a small analytic rate table, the
# cached Monte-Carlo rate table of the slow scenario tests and the
# --runslow switch.
###########################

import numpy as np
import pytest

from channel import SystemConfig, WaveformParams
from config import REFERENCE_SYSTEM, REFERENCE_WAVEFORM, TONE_CORRELATION
from cpfsk import RateThresholdTable, load_rate_table

# Monte-Carlo trials per point of the rate table shared by the slow scenario tests.
SCENARIO_TABLE_TRIALS = 40_000


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def reference_cfg():
    """r_net = 2, sigma_s = 8 dB, mixed fading."""
    return SystemConfig(**REFERENCE_SYSTEM)


@pytest.fixture
def unshadowed_cfg(reference_cfg):
    return reference_cfg.replace(sigma_s_db=0.0)


@pytest.fixture
def reference_wf():
    return WaveformParams(*REFERENCE_WAVEFORM)


def synthetic_rates(h_grid, snr_db_grid):
    """Smooth, monotone stand-in for C(snr, h): 1 - exp(-snr (0.5 + h) / 2)."""
    snr = 10.0 ** (np.asarray(snr_db_grid) / 10.0)
    return 1.0 - np.exp(-0.5 * np.outer(0.5 + np.asarray(h_grid), snr))


@pytest.fixture
def make_table():
    """Factory for analytic rate tables over arbitrary grids."""

    def _make(h_grid=(0.25, 0.5, 0.75, 1.0), snr_db_grid=np.arange(-10.0, 20.5, 1.0)):
        rates = synthetic_rates(h_grid, snr_db_grid)
        return RateThresholdTable(
            h_grid=np.asarray(h_grid, dtype=float),
            snr_db_grid=np.asarray(snr_db_grid, dtype=float),
            rates=rates,
            std_errs=np.full(rates.shape, 1e-3),
            trials=1000,
            seed=7,
        )

    return _make


@pytest.fixture
def small_table(make_table):
    return make_table()


@pytest.fixture(scope="session")
def rate_table(request):
    """Monte-Carlo rate table on the default grids, kept in the pytest cache between runs."""
    cache_dir = request.config.cache.mkdir("fhaci")
    path = str(cache_dir / f"rate_table_{TONE_CORRELATION}_{SCENARIO_TABLE_TRIALS}.json")
    return load_rate_table(path, build_if_missing=True, trials=SCENARIO_TABLE_TRIALS, workers=1, progress=False)
