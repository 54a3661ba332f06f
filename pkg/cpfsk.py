###########################
# cpfsk.py
# Binary CPFSK spectrum, fractional-power bandwidth, spectral efficiency and
# the SINR threshold beta = C^-1(R) of noncoherent reception.
###########################

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, interpolate, optimize, special
from tqdm import tqdm

from config import (
    BANDWIDTH_RTOL,
    DEFAULT_SEED,
    H_MAX_CONTINUOUS,
    RATE_H_GRID,
    RATE_MONOTONE_SIGMAS,
    RATE_SNR_DB_GRID,
    RATE_TABLE_VERSION,
    RATE_TRIALS,
    SHOW_PROGRESS,
    TONE_CORRELATION,
    WORKERS,
)
from exceptions import ConfigError, DomainError, NumericFailure
from simkit import Purpose, RngSpec

logger = logging.getLogger(__name__)

TABLE_FORMAT = "fhaci-rate-table"


# -------------------------
# Power spectral density
# -------------------------
def cpfsk_psd(h: float, fT) -> np.ndarray:
    """
    Two-sided baseband PSD of binary CPFSK with a rectangular frequency pulse,
    normalized to unit power, at normalized frequency fT.
    """
    if not 0 < h < 1:
        raise DomainError(f"h must lie in (0, 1) for the PSD, got {h}")
    f = np.asarray(fT, dtype=float)
    rho = math.cos(math.pi * h)
    a1 = np.sinc(f + h / 2.0)
    a2 = np.sinc(f - h / 2.0)
    cos2 = np.cos(2.0 * math.pi * f)
    denom = 1.0 + rho ** 2 - 2.0 * rho * cos2

    def b(alpha: float) -> np.ndarray:
        return (np.cos(2.0 * math.pi * f - alpha) - rho * math.cos(alpha)) / denom

    cross = b(-math.pi * h) * a1 * a1 + 2.0 * b(0.0) * a1 * a2 + b(math.pi * h) * a2 * a2
    psd = 0.5 * (a1 ** 2 + a2 ** 2) + 0.5 * cross
    psd = np.maximum(psd, 0.0)
    return float(psd) if psd.ndim == 0 else psd


@dataclass(frozen=True)
class SpectrumProfile:
    """PSD of one modulation index; total power is 1."""

    h: float
    total_power: float = 1.0

    def __post_init__(self):
        if not 0 < self.h < 1:
            raise DomainError(f"h must lie in (0, 1), got {self.h}")

    def psd(self, fT):
        return cpfsk_psd(self.h, fT)

    def _spikes(self, upper: float) -> List[float]:
        # near-singular points of the closed form when cos(pi h) is close to +-1
        offset = 0.5 if self.h > 0.5 else 0.0
        return [k + offset for k in range(int(upper) + 1) if 0 < k + offset < upper]

    def in_band_power(self, W: float) -> float:
        """Power inside [-W/2, W/2]."""
        if W <= 0:
            return 0.0
        upper = W / 2.0
        value, _ = integrate.quad(
            self.psd, 0.0, upper, points=self._spikes(upper) or None, limit=400, epsabs=1e-13, epsrel=1e-11
        )
        return 2.0 * value

    def bandwidth(self, psi: float) -> float:
        """Two-sided bandwidth containing a fraction psi of the power."""
        if not 0.5 < psi < 1:
            raise DomainError(f"psi must lie in (0.5, 1), got {psi}")
        hi = 2.0
        while self.in_band_power(hi) < psi:
            hi *= 2.0
            if hi > 4096:
                raise NumericFailure("no bandwidth bracket found", (self.h, psi))
        sol = optimize.root_scalar(
            lambda w: self.in_band_power(w) - psi,
            bracket=(0.0, hi),
            method="bisect",
            xtol=1e-12,
            rtol=BANDWIDTH_RTOL,
            maxiter=200,
        )
        if not sol.converged:
            raise NumericFailure("bandwidth bisection did not converge", (self.h, psi), best_estimate=sol.root)
        return float(sol.root)


def _continuous_h(h: float) -> float:
    if not 0 < h <= 1:
        raise DomainError(f"h must lie in (0, 1], got {h}")
    return min(h, H_MAX_CONTINUOUS)


@lru_cache(maxsize=65536)
def fractional_power_bandwidth(h: float, psi: float) -> float:
    """W(h, psi) normalized to the symbol rate; h = 1 is evaluated just below 1."""
    return SpectrumProfile(_continuous_h(h)).bandwidth(psi)


def spectral_efficiency(h: float, psi: float) -> float:
    """eta(h, psi) = 1 / W(h, psi), symbols/s/Hz."""
    return 1.0 / fractional_power_bandwidth(h, psi)


# -------------------------
# Symmetric information rate (Monte Carlo)
# -------------------------
def tone_correlation(h: float, model: str = TONE_CORRELATION) -> float:
    """Magnitude of the complex correlation between the two CPFSK tones over one symbol."""
    if model == "sinc_2h":
        return abs(float(np.sinc(2.0 * h)))
    if model == "sinc_h":
        return abs(float(np.sinc(h)))
    raise ConfigError(f"unknown tone correlation model {model!r}", field="TONE_CORRELATION")


def symmetric_rate(
    snr_linear: float,
    h: float,
    trials: int = RATE_TRIALS,
    seed: int = DEFAULT_SEED,
    stream: int = 0,
) -> Tuple[float, float]:
    """
    Monte-Carlo symmetric information rate (bits/symbol) of binary
    noncoherent CPFSK, with its standard error.

    Two correlator outputs per symbol, unknown uniform carrier phase and
    noise correlated like the tones. The per-trial contribution is
    1 - log2(1 + I0(2|y_wrong|/N0) / I0(2|y_right|/N0)).
    """
    if snr_linear < 0:
        raise DomainError(f"snr_linear must be >= 0, got {snr_linear}")
    if not 0 < h <= 1:
        raise DomainError(f"h must lie in (0, 1], got {h}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if snr_linear == 0:
        return 0.0, 0.0

    rng = RngSpec(seed).generator(Purpose.RATE, stream)
    rho = tone_correlation(h)
    n0 = 1.0 / snr_linear

    symbol = rng.integers(0, 2, trials)
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, trials))
    w = (rng.standard_normal((2, trials)) + 1j * rng.standard_normal((2, trials))) / math.sqrt(2.0)
    n1 = math.sqrt(n0) * w[0]
    n2 = math.sqrt(n0) * (rho * w[0] + math.sqrt(1.0 - rho ** 2) * w[1])

    # transmitted tone k gives correlator means (1, rho) or (rho, 1)
    s1 = np.where(symbol == 0, 1.0, rho)
    s2 = np.where(symbol == 0, rho, 1.0)
    y1 = phase * s1 + n1
    y2 = phase * s2 + n2
    x1 = 2.0 * np.abs(y1) / n0
    x2 = 2.0 * np.abs(y2) / n0
    log_i1 = np.log(special.i0e(x1)) + x1
    log_i2 = np.log(special.i0e(x2)) + x2
    d = np.where(symbol == 0, log_i2 - log_i1, log_i1 - log_i2)
    contrib = 1.0 - np.logaddexp(0.0, d) / math.log(2.0)

    mean = float(np.mean(contrib))
    std_err = float(np.std(contrib, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, std_err


# -------------------------
# Rate / threshold table
# -------------------------
@dataclass(eq=False)
class RateThresholdTable:
    """
    C(snr, h) on an (h, snr_db) grid with Monte-Carlo standard errors.

    Rows are made monotone in SNR (running maximum) after checking that no
    dip exceeds the Monte-Carlo noise, then interpolated with PCHIP in SNR
    and linearly across h.
    """

    h_grid: np.ndarray
    snr_db_grid: np.ndarray
    rates: np.ndarray
    std_errs: np.ndarray
    trials: int
    seed: int
    tone_correlation: str = TONE_CORRELATION
    version: int = RATE_TABLE_VERSION
    smoothed: np.ndarray = field(init=False, repr=False)
    _rows: List[interpolate.PchipInterpolator] = field(init=False, repr=False)

    def __post_init__(self):
        self.h_grid = np.asarray(self.h_grid, dtype=float)
        self.snr_db_grid = np.asarray(self.snr_db_grid, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        self.std_errs = np.asarray(self.std_errs, dtype=float)
        shape = (len(self.h_grid), len(self.snr_db_grid))
        if self.rates.shape != shape or self.std_errs.shape != shape:
            raise ConfigError(f"rate table arrays must have shape {shape}", field="rates")
        if np.any(np.diff(self.h_grid) <= 0) or np.any(np.diff(self.snr_db_grid) <= 0):
            raise ConfigError("rate table grids must be strictly increasing", field="grid")
        if len(self.snr_db_grid) < 2:
            raise ConfigError("rate table needs at least two SNR points", field="snr_db_grid")
        self.smoothed = self._monotone()
        self._rows = [interpolate.PchipInterpolator(self.snr_db_grid, row) for row in self.smoothed]

    def _monotone(self) -> np.ndarray:
        running = np.maximum.accumulate(self.rates, axis=1)
        prev_idx = np.zeros(self.rates.shape, dtype=int)
        for i in range(self.rates.shape[0]):
            best = 0
            for j in range(self.rates.shape[1]):
                if self.rates[i, j] >= self.rates[i, best]:
                    best = j
                prev_idx[i, j] = best
        se_best = np.take_along_axis(self.std_errs, prev_idx, axis=1)
        noise = RATE_MONOTONE_SIGMAS * np.sqrt(self.std_errs ** 2 + se_best ** 2) + 1e-12
        dips = running - self.rates
        if np.any(dips > noise):
            i, j = np.unravel_index(np.argmax(dips - noise), dips.shape)
            raise NumericFailure(
                "rate table is not monotone in SNR beyond Monte-Carlo noise",
                (float(self.h_grid[i]), float(self.snr_db_grid[j])),
            )
        return np.clip(running, 0.0, 1.0)

    # ---------- lookup ----------
    def _h_weights(self, h: float) -> Tuple[int, int, float]:
        if not 0 < h <= 1:
            raise DomainError(f"h must lie in (0, 1], got {h}")
        h = min(max(h, self.h_grid[0]), self.h_grid[-1])
        hi = int(np.searchsorted(self.h_grid, h))
        if hi == 0:
            return 0, 0, 0.0
        lo = hi - 1
        frac = (h - self.h_grid[lo]) / (self.h_grid[hi] - self.h_grid[lo])
        return lo, hi, float(frac)

    def rate(self, snr_db: float, h: float) -> float:
        """Interpolated C at snr_db (clipped to the grid) and modulation index h."""
        snr_db = min(max(snr_db, self.snr_db_grid[0]), self.snr_db_grid[-1])
        lo, hi, frac = self._h_weights(h)
        value = (1.0 - frac) * self._rows[lo](snr_db) + frac * self._rows[hi](snr_db)
        return float(value)

    def achievable_range(self, h: float) -> Tuple[float, float]:
        return self.rate(self.snr_db_grid[0], h), self.rate(self.snr_db_grid[-1], h)

    def sinr_threshold(self, R: float, h: float) -> float:
        """beta (linear) with C(beta, h) = R."""
        if not 0 < R < 1:
            raise DomainError(f"R must lie in (0, 1), got {R}")
        lo_rate, hi_rate = self.achievable_range(h)
        if not lo_rate < R < hi_rate:
            raise DomainError(f"R={R} outside the achievable range ({lo_rate:.4f}, {hi_rate:.4f}) at h={h}")
        sol = optimize.root_scalar(
            lambda x: self.rate(x, h) - R,
            bracket=(float(self.snr_db_grid[0]), float(self.snr_db_grid[-1])),
            method="brentq",
            xtol=1e-9,
        )
        return 10.0 ** (sol.root / 10.0)

    # ---------- persistence ----------
    def to_dict(self) -> Dict[str, object]:
        return {
            "format": TABLE_FORMAT,
            "version": self.version,
            "h_grid": self.h_grid.tolist(),
            "snr_db_grid": self.snr_db_grid.tolist(),
            "trials": self.trials,
            "seed": self.seed,
            "tone_correlation": self.tone_correlation,
            "rates": self.rates.tolist(),
            "std_errs": self.std_errs.tolist(),
        }

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
        logger.info(f"[RateThresholdTable.save] wrote {path}")
        return path

    @classmethod
    def load(cls, path: str) -> "RateThresholdTable":
        if not os.path.exists(path):
            raise ConfigError(f"rate table not found at {path}; run build-table first", field="rate_table")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"rate table is not valid JSON: {exc}", field="rate_table") from exc
        if data.get("format") != TABLE_FORMAT:
            raise ConfigError(f"unexpected format {data.get('format')!r}", field="rate_table.format")
        if data.get("version") != RATE_TABLE_VERSION:
            raise ConfigError(f"unsupported version {data.get('version')!r}", field="rate_table.version")
        model = data.get("tone_correlation", TONE_CORRELATION)
        if model != TONE_CORRELATION:
            logger.warning(f"[RateThresholdTable.load] {path} was built with tone correlation {model!r}, not {TONE_CORRELATION!r}")
        return cls(
            h_grid=data["h_grid"],
            snr_db_grid=data["snr_db_grid"],
            rates=data["rates"],
            std_errs=data["std_errs"],
            trials=int(data["trials"]),
            seed=int(data["seed"]),
            tone_correlation=model,
            version=int(data["version"]),
        )


def sinr_threshold(R: float, h: float, table: RateThresholdTable) -> float:
    return table.sinr_threshold(R, h)


def _rate_point(args) -> Tuple[float, float]:
    snr_db, h, trials, seed, stream = args
    return symmetric_rate(10.0 ** (snr_db / 10.0), h, trials, seed, stream)


def build_rate_table(
    h_grid: Sequence[float] = RATE_H_GRID,
    snr_db_grid: Sequence[float] = RATE_SNR_DB_GRID,
    trials: int = RATE_TRIALS,
    seed: int = DEFAULT_SEED,
    workers: int = WORKERS,
    progress: bool = SHOW_PROGRESS,
) -> RateThresholdTable:
    """Estimate C on every grid point; point k uses substream k so results ignore the worker count."""
    points = [
        (float(s), float(h), trials, seed, i * len(snr_db_grid) + j)
        for i, h in enumerate(h_grid)
        for j, s in enumerate(snr_db_grid)
    ]
    logger.info(f"[build_rate_table] {len(points)} grid points x {trials} trials, workers={workers}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_rate_point, points), total=len(points), disable=not progress))
    else:
        results = [_rate_point(p) for p in tqdm(points, disable=not progress)]
    values = np.array(results).reshape(len(h_grid), len(snr_db_grid), 2)
    return RateThresholdTable(
        h_grid=np.asarray(h_grid, dtype=float),
        snr_db_grid=np.asarray(snr_db_grid, dtype=float),
        rates=values[..., 0],
        std_errs=values[..., 1],
        trials=trials,
        seed=seed,
    )


def load_rate_table(path: str, build_if_missing: bool = False, **build_kwargs) -> RateThresholdTable:
    """Load the persisted table, optionally building and saving it first."""
    if build_if_missing and not os.path.exists(path):
        logger.info(f"[load_rate_table] no table at {path}, building it")
        table = build_rate_table(**build_kwargs)
        table.save(path)
        return table
    return RateThresholdTable.load(path)
