###########################
# simkit.py
# Monte-Carlo oracle: placements, shadowing, fading and hopping collisions
# simulated trial by trial to validate every analytic outage path.
###########################

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from channel import CollisionModel, SystemConfig, WaveformParams, collision_probabilities
from config import MC_BLOCK_SIZE, WORKERS
from exceptions import DomainError

if TYPE_CHECKING:
    from outage import ConditionalContext

logger = logging.getLogger(__name__)

RESAMPLE_ALL: FrozenSet[str] = frozenset({"positions", "shadowing", "fading", "collisions"})
RESAMPLE_CONDITIONAL: FrozenSet[str] = frozenset({"fading", "collisions"})

# indicator codes used in sampled arrays; order matches CollisionModel.probabilities
CO_CHANNEL, ADJACENT, NO_COLLISION = 0, 1, 2


class Purpose(enum.IntEnum):
    """Tag that separates independent random substreams."""

    POSITIONS = 0
    SHADOWING = 1
    FADING = 2
    COLLISIONS = 3
    SOURCE = 4
    RATE = 5
    HYBRID_SOURCE = 6


FIXED_BLOCK = 2 ** 31 - 1


# -------------------------
# Counter-based substreams
# -------------------------
@dataclass(frozen=True)
class RngSpec:
    """
    Seed plus trial-block size.

    Every (purpose, block) pair maps to its own Philox stream, so the draws of
    a block never depend on how blocks are spread across workers.
    """

    seed: int
    block_size: int = MC_BLOCK_SIZE

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.block_size < 1:
            raise DomainError(f"block_size must be >= 1, got {self.block_size}")

    def generator(self, purpose: int, block: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(int(purpose), int(block)))
        return np.random.Generator(np.random.Philox(seq))

    def blocks(self, trials: int) -> List[Tuple[int, int]]:
        """(block index, trials in block) covering `trials` in order."""
        full, rest = divmod(trials, self.block_size)
        sizes = [(b, self.block_size) for b in range(full)]
        if rest:
            sizes.append((full, rest))
        return sizes


@dataclass(frozen=True)
class TrialBatchResult:
    outage_count: int
    trials: int

    def __post_init__(self):
        if not 0 <= self.outage_count <= self.trials:
            raise DomainError(f"outage_count {self.outage_count} outside [0, {self.trials}]")

    @property
    def epsilon_hat(self) -> float:
        return self.outage_count / self.trials if self.trials else 0.0

    @property
    def std_err(self) -> float:
        if not self.trials:
            return 0.0
        p = self.epsilon_hat
        return math.sqrt(p * (1.0 - p) / self.trials)

    def __add__(self, other: "TrialBatchResult") -> "TrialBatchResult":
        return TrialBatchResult(self.outage_count + other.outage_count, self.trials + other.trials)


# -------------------------
# Samplers
# -------------------------
def sample_annulus(count: int, r_ex: float, r_net: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Radii and angles of `count` points uniform in area over the annulus."""
    if not 0 <= r_ex < r_net:
        raise DomainError(f"invalid annulus [{r_ex}, {r_net}]")
    if count < 0:
        raise DomainError(f"count must be >= 0, got {count}")
    u = rng.random(count)
    radii = np.sqrt(u * (r_net ** 2 - r_ex ** 2) + r_ex ** 2)
    angles = rng.uniform(0.0, 2.0 * math.pi, count)
    return radii, angles


def sample_nakagami_gain(m, rng: np.random.Generator, size=None) -> np.ndarray:
    """Unit-mean power gain of Nakagami-m fading: Gamma(shape m, scale 1/m)."""
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DomainError("Nakagami parameter must be positive")
    return rng.gamma(m, 1.0 / m, size)


def sample_indicators(collision: CollisionModel, rng: np.random.Generator, size) -> np.ndarray:
    """Indicator codes drawn i.i.d. from (p_c, p_a, p_n)."""
    u = rng.random(size)
    return np.where(u < collision.p_c, CO_CHANNEL, np.where(u < collision.p_c + collision.p_a, ADJACENT, NO_COLLISION))


def sample_channel_collisions(L: int, D: float, size: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """
    Indicator codes from explicit channel selection.

    Each row is one hop: the source and every interferer pick a channel
    uniformly among L, and each interferer transmits with probability D.
    """
    if int(L) != L or L < 1:
        raise DomainError(f"explicit channel selection needs an integer L >= 1, got {L}")
    trials, count = size
    source = rng.integers(0, L, size=(trials, 1))
    channels = rng.integers(0, L, size=(trials, count))
    active = rng.random((trials, count)) < D
    gap = np.abs(channels - source)
    codes = np.full((trials, count), NO_COLLISION)
    codes[active & (gap == 1)] = ADJACENT
    codes[active & (gap == 0)] = CO_CHANNEL
    return codes


# -------------------------
# Trial kernel
# -------------------------
@dataclass(frozen=True)
class _Scenario:
    """Everything a worker needs to run one block of trials."""

    rng: RngSpec
    beta: float
    psi: float
    snr_linear: float
    m0: int
    m_list: Tuple[float, ...]
    collision: CollisionModel
    resample: FrozenSet[str]
    omega0: Optional[float] = None
    omegas: Optional[Tuple[float, ...]] = None
    cfg: Optional[SystemConfig] = None
    explicit_L: Optional[int] = None

    @property
    def weights(self) -> Tuple[float, float, float]:
        return (self.psi, self.collision.K_s, 0.0)


def draw_fixed_omegas(cfg: SystemConfig, rng: RngSpec) -> Tuple[float, Tuple[float, ...]]:
    """Omega_0 and Omega_1..M drawn once from the fixed substreams of `rng`."""
    return _omegas(cfg, rng, FIXED_BLOCK, 1, frozenset())


def _omegas(cfg: SystemConfig, rng: RngSpec, block: int, n: int, resample: FrozenSet[str]):
    pos_block = block if "positions" in resample else FIXED_BLOCK
    shadow_block = block if "shadowing" in resample else FIXED_BLOCK
    rows = n if "positions" in resample else 1
    radii, _ = sample_annulus(rows * cfg.M, cfg.r_ex, cfg.r_net, rng.generator(Purpose.POSITIONS, pos_block))
    radii = radii.reshape(rows, cfg.M)

    shadow = np.zeros((1, cfg.M))
    shadow0 = np.zeros(1)
    if cfg.sigma_s_db > 0:
        rows_s = n if "shadowing" in resample else 1
        shadow = rng.generator(Purpose.SHADOWING, shadow_block).normal(0.0, cfg.sigma_s_db, (rows_s, cfg.M))
        shadow0 = rng.generator(Purpose.SOURCE, shadow_block).normal(0.0, cfg.sigma_s_db, rows_s)

    c = np.asarray(cfg.c_list)
    omegas = c * 10.0 ** (shadow / 10.0) * radii ** (-cfg.alpha)
    omega0 = 10.0 ** (shadow0 / 10.0) * cfg.omega0
    if block == FIXED_BLOCK:
        return float(omega0[0]), tuple(float(v) for v in omegas[0])
    return omega0, omegas


def _run_block(scenario: _Scenario, block: int, n: int) -> int:
    rng = scenario.rng
    resample = scenario.resample
    M = len(scenario.m_list)

    if scenario.omegas is not None:
        omega0 = np.asarray(scenario.omega0)
        omegas = np.asarray(scenario.omegas).reshape(1, M)
    else:
        omega0, omegas = _omegas(scenario.cfg, rng, block, n, resample)
        omega0, omegas = np.asarray(omega0), np.asarray(omegas).reshape(-1, M)

    fade_block, rows = (block, n) if "fading" in resample else (FIXED_BLOCK, 1)
    fading = rng.generator(Purpose.FADING, fade_block)
    g0 = sample_nakagami_gain(scenario.m0, fading, rows)
    g = sample_nakagami_gain(np.asarray(scenario.m_list), fading, (rows, M))

    coll_block, rows = (block, n) if "collisions" in resample else (FIXED_BLOCK, 1)
    coll_rng = rng.generator(Purpose.COLLISIONS, coll_block)
    if scenario.explicit_L is not None:
        codes = sample_channel_collisions(scenario.explicit_L, scenario.cfg.duty_factor, (rows, M), coll_rng)
    else:
        codes = sample_indicators(scenario.collision, coll_rng, (rows, M))
    weights = np.asarray(scenario.weights)[codes]

    interference = np.sum(weights * g * omegas, axis=-1)
    noise = 0.0 if math.isinf(scenario.snr_linear) else 1.0 / scenario.snr_linear
    with np.errstate(divide="ignore"):
        sinr = scenario.psi * g0 * omega0 / (noise + interference)
    sinr = np.broadcast_to(sinr, (n,))
    return int(np.count_nonzero(sinr <= scenario.beta))


def _run_block_args(args) -> int:
    return _run_block(*args)


def _simulate(scenario: _Scenario, trials: int, workers: int) -> TrialBatchResult:
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    blocks = scenario.rng.blocks(trials)
    jobs = [(scenario, b, n) for b, n in blocks]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_run_block_args, jobs))
    else:
        counts = [_run_block_args(job) for job in jobs]
    # ordered reduction keeps totals independent of the worker count
    total = TrialBatchResult(0, 0)
    for (_, n), count in zip(blocks, counts):
        total = total + TrialBatchResult(count, n)
    return total


def simulate_conditional_outage(
    ctx: "ConditionalContext",
    trials: int,
    rng: RngSpec,
    workers: int = WORKERS,
) -> TrialBatchResult:
    """Empirical outage with Omega fixed; fading and collision indicators drawn per trial."""
    scenario = _Scenario(
        rng=rng,
        beta=ctx.beta,
        psi=ctx.psi,
        snr_linear=ctx.snr_linear,
        m0=ctx.m0,
        m_list=tuple(ctx.m_list),
        collision=ctx.collision,
        resample=RESAMPLE_CONDITIONAL,
        omega0=float(ctx.omegas[0]),
        omegas=tuple(float(v) for v in ctx.omegas[1:]),
    )
    result = _simulate(scenario, trials, workers)
    logger.debug("[simulate_conditional_outage] %d/%d outages", result.outage_count, result.trials)
    return result


def simulate_network_outage(
    cfg: SystemConfig,
    wf: WaveformParams,
    beta: float,
    trials: int,
    rng: RngSpec,
    resample: Iterable[str] = RESAMPLE_ALL,
    collision: Optional[CollisionModel] = None,
    explicit_channels: bool = False,
    workers: int = WORKERS,
) -> TrialBatchResult:
    """
    Empirical outage of the full network model.

    Components named in `resample` are redrawn every trial; the others are
    drawn once from the fixed substreams (see draw_fixed_omegas). The source
    shadowing is redrawn iff "shadowing" is resampled.
    """
    resample = frozenset(resample)
    unknown = resample - RESAMPLE_ALL
    if unknown:
        raise DomainError(f"unknown resample components: {sorted(unknown)}")
    collision = collision or collision_probabilities(wf.L, cfg.duty_factor, wf.psi)
    explicit_L = None
    if explicit_channels:
        explicit_L = int(math.floor(wf.L + 0.5))
    scenario = _Scenario(
        rng=rng,
        beta=beta,
        psi=wf.psi,
        snr_linear=cfg.snr_linear,
        m0=cfg.m0,
        m_list=cfg.m_list,
        collision=collision,
        resample=resample,
        cfg=cfg,
        explicit_L=explicit_L,
    )
    if not {"positions", "shadowing"} & resample:
        omega0, omegas = draw_fixed_omegas(cfg, rng)
        scenario = dataclasses.replace(scenario, omega0=omega0, omegas=omegas)
    result = _simulate(scenario, trials, workers)
    logger.debug("[simulate_network_outage] resample=%s %d/%d outages", sorted(resample), result.outage_count, result.trials)
    return result


def indicator_frequencies(codes: np.ndarray) -> Sequence[float]:
    """Empirical (co-channel, adjacent, none) frequencies of sampled indicator codes."""
    codes = np.asarray(codes).ravel()
    counts = np.bincount(codes, minlength=3)
    return tuple(counts / max(codes.size, 1))
