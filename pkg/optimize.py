###########################
# optimize.py
# Maximizes the MCTC over theta = (L, R, h, psi): exhaustive grid evaluation
# and a bounded Nelder-Mead simplex, plus profile sweeps built on them.
###########################

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from capacity import CapacityResult, mctc
from channel import SystemConfig, WaveformParams
from config import (
    DEFAULT_SEED,
    GRID_H_STEP,
    GRID_L_RANGE,
    GRID_MAX_FAILURE_FRACTION,
    GRID_PSI_RANGE,
    GRID_PSI_STEP,
    GRID_R_STEP,
    NM_BOUNDS,
    NM_DEGENERATE_RATIO,
    NM_FTOL,
    NM_INITIAL,
    NM_MAX_ITER,
    NM_RESTART_SCALE,
    NM_STEPS,
    NM_XTOL,
    SHADOW_MC_DRAWS,
    SHOW_PROGRESS,
    WORKERS,
)
from cpfsk import RateThresholdTable
from exceptions import DomainError, NumericFailure, OptimizationError
from outage import OutageMethod, OutageResult, spatial_outage

logger = logging.getLogger(__name__)

COORDINATES = ("L", "R", "h", "psi")
Objective = Callable[[WaveformParams], float]


# -------------------------
# Objective
# -------------------------
@dataclass
class MctcObjective:
    """
    tau'(theta) for a fixed system.

    beta = C^-1(R) comes from the rate table; a rate above what the table
    reaches at h is certain outage, a rate below it uses the lowest tabulated
    SINR. Shadowed evaluations reuse one seed (common random numbers) and
    every distinct theta is computed once.
    """

    cfg: SystemConfig
    table: RateThresholdTable
    seed: int = DEFAULT_SEED
    mc_draws: int = SHADOW_MC_DRAWS
    neglect_aci: bool = False
    evaluations: int = 0
    _cache: Dict[Tuple[float, ...], CapacityResult] = field(default_factory=dict, repr=False)

    def beta(self, wf: WaveformParams) -> Optional[float]:
        """SINR threshold for the waveform, or None when R is not achievable."""
        lo_rate, hi_rate = self.table.achievable_range(wf.h)
        if wf.R >= hi_rate:
            return None
        if wf.R <= lo_rate:
            return 10.0 ** (self.table.snr_db_grid[0] / 10.0)
        return self.table.sinr_threshold(wf.R, wf.h)

    def evaluate(self, wf: WaveformParams) -> CapacityResult:
        key = tuple(round(v, 12) for v in wf.as_tuple())
        if key in self._cache:
            return self._cache[key]
        self.evaluations += 1
        beta = self.beta(wf)
        if beta is None:
            eps = OutageResult(value=1.0, method=OutageMethod.UNSHADOWED)
        else:
            eps = spatial_outage(self.cfg, wf, beta, seed=self.seed, mc_draws=self.mc_draws, neglect_aci=self.neglect_aci)
        result = mctc(self.cfg, wf, eps)
        self._cache[key] = result
        return result

    def __call__(self, wf: WaveformParams) -> float:
        return self.evaluate(wf).tau_norm


# -------------------------
# Search space and results
# -------------------------
def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 10)


@dataclass(frozen=True)
class SearchSpace:
    """Discrete values per coordinate for the grid search, plus simplex bounds."""

    L_values: Tuple[float, ...]
    R_values: Tuple[float, ...]
    h_values: Tuple[float, ...]
    psi_values: Tuple[float, ...]
    bounds: Tuple[Tuple[float, float], ...] = NM_BOUNDS

    def __post_init__(self):
        for name in ("L_values", "R_values", "h_values", "psi_values"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise DomainError(f"{name} must not be empty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise DomainError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, values)
        if len(self.bounds) != 4 or any(lo >= hi for lo, hi in self.bounds):
            raise DomainError("bounds must hold four ordered (lo, hi) pairs")

    @property
    def size(self) -> int:
        return len(self.L_values) * len(self.R_values) * len(self.h_values) * len(self.psi_values)

    def points(self):
        """Grid points in (L, R, h, psi) lexicographic order."""
        return itertools.product(self.L_values, self.R_values, self.h_values, self.psi_values)

    def with_values(self, name: str, values: Sequence[float]) -> "SearchSpace":
        return SearchSpace(**{**self._asdict(), f"{name}_values": tuple(values)})

    def _asdict(self) -> Dict[str, object]:
        return {
            "L_values": self.L_values,
            "R_values": self.R_values,
            "h_values": self.h_values,
            "psi_values": self.psi_values,
            "bounds": self.bounds,
        }

    @classmethod
    def full(cls, psi_values: Optional[Sequence[float]] = None) -> "SearchSpace":
        """All integer L in [1, 200]; R and h in steps of 0.01; psi in [0.90, 0.999]."""
        psi = psi_values if psi_values is not None else list(_grid(GRID_PSI_RANGE[0], GRID_PSI_RANGE[1], GRID_PSI_STEP)) + [GRID_PSI_RANGE[1]]
        return cls(
            L_values=tuple(range(GRID_L_RANGE[0], GRID_L_RANGE[1] + 1)),
            R_values=tuple(_grid(GRID_R_STEP, 1.0 - GRID_R_STEP, GRID_R_STEP)),
            h_values=tuple(_grid(GRID_H_STEP, 1.0, GRID_H_STEP)),
            psi_values=tuple(sorted(set(float(p) for p in psi))),
        )


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    theta: Tuple[float, float, float, float]
    tau: float


@dataclass
class OptimizationResult:
    theta_opt: WaveformParams
    tau_opt: float
    evaluations: int
    trace: List[TraceEntry]
    method: str
    theta_raw: Optional[WaveformParams] = None
    failures: int = 0
    iterations: int = 0

    def trace_frame(self) -> pd.DataFrame:
        rows = [
            {"iteration": t.iteration, "L": t.theta[0], "R": t.theta[1], "h": t.theta[2], "psi": t.theta[3], "tau": t.tau}
            for t in self.trace
        ]
        return pd.DataFrame(rows, columns=["iteration", "L", "R", "h", "psi", "tau"])

    def to_dict(self) -> Dict[str, object]:
        out = {
            "method": self.method,
            "theta_opt": self.theta_opt.to_dict(),
            "tau_opt": self.tau_opt,
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "failures": self.failures,
        }
        if self.theta_raw is not None:
            out["theta_raw"] = self.theta_raw.to_dict()
        return out


# -------------------------
# Exhaustive grid search
# -------------------------
def _safe_eval(args) -> Optional[float]:
    objective, theta = args
    try:
        return float(objective(WaveformParams.from_tuple(theta)))
    except (DomainError, NumericFailure) as exc:
        logger.debug("[grid_search] theta=%s failed: %s", theta, exc)
        return None


def grid_search(
    cfg: SystemConfig,
    space: SearchSpace,
    objective: Objective,
    maximize: bool = True,
    workers: int = WORKERS,
    progress: bool = SHOW_PROGRESS,
) -> OptimizationResult:
    """
    Exact optimum over the grid. Points are visited in (L, R, h, psi)
    lexicographic order and only a strict improvement replaces the incumbent,
    so ties go to the smallest L, then R, h and psi.
    """
    points = list(space.points())
    logger.info(f"[grid_search] {len(points)} grid points, M={cfg.M}, workers={workers}")
    jobs = ((objective, p) for p in points)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(tqdm(pool.map(_safe_eval, jobs, chunksize=64), total=len(points), disable=not progress))
    else:
        values = [_safe_eval(job) for job in tqdm(jobs, total=len(points), disable=not progress)]

    sign = 1.0 if maximize else -1.0
    best_theta, best_value, failures = None, -math.inf, 0
    trace: List[TraceEntry] = []
    for index, (theta, value) in enumerate(zip(points, values)):
        if value is None or not math.isfinite(value):
            failures += 1
            continue
        if sign * value > best_value:
            best_theta, best_value = theta, sign * value
            trace.append(TraceEntry(index, tuple(theta), value))

    if failures > GRID_MAX_FAILURE_FRACTION * len(points):
        raise OptimizationError(f"{failures} of {len(points)} grid points failed")
    if best_theta is None:
        raise OptimizationError("no grid point could be evaluated")
    return OptimizationResult(
        theta_opt=WaveformParams.from_tuple(best_theta),
        tau_opt=sign * best_value,
        evaluations=len(points),
        trace=trace,
        method="grid",
        failures=failures,
    )


# -------------------------
# Nelder-Mead simplex
# -------------------------
@dataclass(frozen=True)
class NelderMeadOptions:
    initial: Tuple[float, float, float, float] = NM_INITIAL
    steps: Tuple[float, float, float, float] = NM_STEPS
    bounds: Tuple[Tuple[float, float], ...] = NM_BOUNDS
    max_iter: int = NM_MAX_ITER
    xtol: float = NM_XTOL
    ftol: float = NM_FTOL
    degenerate_ratio: float = NM_DEGENERATE_RATIO
    restart_scale: float = NM_RESTART_SCALE


class _SimplexCost:
    """C(theta) = -tau'(theta) on the free coordinates; +inf outside the bounds or on failure."""

    def __init__(self, objective: Objective, options: NelderMeadOptions, base: np.ndarray, free: List[int]):
        self.objective = objective
        self.options = options
        self.base = base
        self.free = free
        self.calls = 0

    def theta(self, x: np.ndarray) -> np.ndarray:
        full = self.base.copy()
        full[self.free] = x
        return full

    def __call__(self, x: np.ndarray) -> float:
        theta = self.theta(x)
        for value, (lo, hi) in zip(theta, self.options.bounds):
            if not lo <= value <= hi:
                return math.inf
        self.calls += 1
        try:
            return -float(self.objective(WaveformParams.from_tuple(theta)))
        except (DomainError, NumericFailure) as exc:
            logger.debug("[nelder_mead] theta=%s failed: %s", tuple(theta), exc)
            return math.inf


def nelder_mead(
    cfg: SystemConfig,
    objective: Objective,
    init: Optional[WaveformParams] = None,
    options: Optional[NelderMeadOptions] = None,
    fixed: Optional[Dict[str, float]] = None,
) -> OptimizationResult:
    """
    Downhill simplex over the free coordinates of theta (all four unless some
    are fixed). The worst corner is reflected through the centroid of the
    others, then expanded, contracted or the whole simplex shrunk toward the
    best corner. L is searched as a real and rounded half-up at the end, where
    tau' is re-evaluated.
    """
    options = options or NelderMeadOptions()
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(COORDINATES)
    if unknown:
        raise DomainError(f"unknown fixed coordinates: {sorted(unknown)}")
    start = np.array(init.as_tuple() if init is not None else options.initial, dtype=float)
    for name, value in fixed.items():
        start[COORDINATES.index(name)] = value
    free = [i for i, name in enumerate(COORDINATES) if name not in fixed]
    if not free:
        raise DomainError("at least one coordinate must be free")
    steps = np.asarray(options.steps, dtype=float)[free]
    cost = _SimplexCost(objective, options, start, free)
    n = len(free)

    def initial_simplex(center: np.ndarray, offsets: np.ndarray) -> List[Tuple[np.ndarray, float]]:
        corners = [center.copy()] + [center + offsets[i] * np.eye(n)[i] for i in range(n)]
        return [(x, cost(x)) for x in corners]

    simplex = initial_simplex(start[free], steps)
    if all(math.isinf(c) for _, c in simplex):
        raise OptimizationError(f"objective failed at every initial corner around {tuple(start)}")

    trace: List[TraceEntry] = []
    restarted = False
    iteration = 0
    logger.info(f"[nelder_mead] start={tuple(start)} free={[COORDINATES[i] for i in free]} M={cfg.M}")
    while True:
        simplex.sort(key=lambda corner: corner[1])
        best_x, best_c = simplex[0]
        trace.append(TraceEntry(iteration, tuple(cost.theta(best_x)), -best_c))

        xs = np.array([x for x, _ in simplex])
        costs = np.array([c for _, c in simplex])
        diameter = float(np.max(np.abs(xs - best_x) / steps))
        spread = costs[-1] - costs[0] if np.all(np.isfinite(costs)) else math.inf
        if diameter < options.xtol or spread < options.ftol or iteration >= options.max_iter:
            break

        volume = abs(float(np.linalg.det((xs[1:] - best_x) / steps)))
        if not restarted and volume < options.degenerate_ratio:
            logger.info(f"[nelder_mead] degenerate simplex at iteration {iteration}, restarting")
            simplex = [(best_x, best_c)] + initial_simplex(best_x, steps * options.restart_scale)[1:]
            restarted = True
            iteration += 1
            continue

        iteration += 1
        centroid = xs[:-1].mean(axis=0)
        worst_x, worst_c = simplex[-1]
        second_worst_c = simplex[-2][1]

        reflected = 2.0 * centroid - worst_x
        reflected_c = cost(reflected)
        if best_c <= reflected_c < second_worst_c:
            simplex[-1] = (reflected, reflected_c)
            continue

        if reflected_c < best_c:
            expanded = centroid + 2.0 * (centroid - worst_x)
            expanded_c = cost(expanded)
            simplex[-1] = (expanded, expanded_c) if expanded_c < reflected_c else (reflected, reflected_c)
            continue

        # contraction toward the better of the worst corner and its reflection
        base_x, base_c = (worst_x, worst_c) if worst_c <= reflected_c else (reflected, reflected_c)
        contracted = centroid + 0.5 * (base_x - centroid)
        contracted_c = cost(contracted)
        if contracted_c < base_c:
            simplex[-1] = (contracted, contracted_c)
            continue

        simplex = [(best_x, best_c)] + [
            (best_x + 0.5 * (x - best_x), cost(best_x + 0.5 * (x - best_x))) for x, _ in simplex[1:]
        ]

    theta_raw = WaveformParams.from_tuple(cost.theta(best_x))
    theta_opt = theta_raw.rounded() if "L" not in fixed else theta_raw
    tau_opt = float(objective(theta_opt))
    logger.info(
        f"[nelder_mead] done after {iteration} iterations, {cost.calls} evaluations: "
        f"theta={theta_opt.as_tuple()} tau={tau_opt:.6g}"
    )
    return OptimizationResult(
        theta_opt=theta_opt,
        tau_opt=tau_opt,
        evaluations=cost.calls + 1,
        trace=trace,
        method="nelder-mead",
        theta_raw=theta_raw,
        iterations=iteration,
    )


# -------------------------
# Sweeps built on the optimizers
# -------------------------
def profile_curve(
    cfg: SystemConfig,
    fixed: str,
    values: Sequence[float],
    objective: Objective,
    init: Optional[WaveformParams] = None,
    options: Optional[NelderMeadOptions] = None,
    space: Optional[SearchSpace] = None,
    progress: bool = SHOW_PROGRESS,
) -> pd.DataFrame:
    """
    tau'_opt with one coordinate held at each sweep value and the others
    optimized (Nelder-Mead, or the grid when `space` is given).
    """
    if fixed not in COORDINATES:
        raise DomainError(f"unknown coordinate {fixed!r}")
    if not len(values):
        raise DomainError("sweep values must not be empty")
    rows = []
    for value in tqdm(values, desc=f"profile {fixed}", disable=not progress):
        if space is not None:
            result = grid_search(cfg, space.with_values(fixed, [value]), objective, progress=False)
        else:
            result = nelder_mead(cfg, objective, init=init, options=options, fixed={fixed: value})
        theta = result.theta_opt
        rows.append({fixed: value, **{k: v for k, v in theta.to_dict().items() if k != fixed}, "tau_opt": result.tau_opt})
        logger.info(f"[profile_curve] {fixed}={value}: tau_opt={result.tau_opt:.6g}")
    return pd.DataFrame(rows)


def psi_vs_distance(
    cfg: SystemConfig,
    r_values: Sequence[float],
    alphas: Sequence[float],
    make_objective: Callable[[SystemConfig], Objective],
    init: Optional[WaveformParams] = None,
    options: Optional[NelderMeadOptions] = None,
    progress: bool = SHOW_PROGRESS,
) -> pd.DataFrame:
    """Optimal psi as a function of the normalized source distance r = |X0| / r_net and alpha."""
    rows = []
    for alpha, r in tqdm(list(itertools.product(alphas, r_values)), desc="psi vs distance", disable=not progress):
        if not 0 < r <= 1:
            raise DomainError(f"normalized distance must lie in (0, 1], got {r}")
        scenario = cfg.replace(alpha=float(alpha), x0_distance=float(r) * cfg.r_net)
        result = nelder_mead(scenario, make_objective(scenario), init=init, options=options)
        theta = result.theta_opt
        rows.append({"r": r, "alpha": alpha, **theta.to_dict(), "tau_opt": result.tau_opt})
    return pd.DataFrame(rows, columns=["r", "alpha", "L", "R", "h", "psi", "tau_opt"])
