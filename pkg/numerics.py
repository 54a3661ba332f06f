###########################
# numerics.py
# Special functions and quadrature used by the analytical outage expressions.
###########################

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from config import (
    HYP2F1_MAX_TERMS,
    HYP2F1_TERM_TOL,
    SIMPSON_ABS_TOL,
    SIMPSON_MAX_PANELS,
    SIMPSON_PANELS,
    SIMPSON_REL_TOL,
)
from exceptions import DomainError, NumericFailure

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# -------------------------
# Quadrature settings
# -------------------------
@dataclass(frozen=True)
class QuadratureSpec:
    """
    Composite-Simpson settings.

    panels is the starting number of sub-intervals; it is doubled until two
    successive estimates agree to max(abs_tol, rel_tol * |estimate|) or
    max_panels is exceeded.
    """

    panels: int = SIMPSON_PANELS
    abs_tol: float = SIMPSON_ABS_TOL
    rel_tol: float = SIMPSON_REL_TOL
    max_panels: int = SIMPSON_MAX_PANELS

    def __post_init__(self):
        if self.panels < 2 or self.panels % 2:
            raise DomainError(f"panels must be even and >= 2, got {self.panels}")
        if self.max_panels < self.panels:
            raise DomainError(f"max_panels ({self.max_panels}) must be >= panels ({self.panels})")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("at least one of abs_tol / rel_tol must be positive")


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _is_integer(x: float, tol: float = 1e-12) -> bool:
    return abs(x - round(x)) < tol


# -------------------------
# Gauss hypergeometric function
# -------------------------
def _gauss_series(a: float, b: float, c: float, z: float, max_terms: int = HYP2F1_MAX_TERMS) -> float:
    """Defining series of 2F1, valid for |z| < 1."""
    total = 1.0
    term = 1.0
    ratio_bound = abs(z)
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        # geometric tail estimate: |term| * |z| / (1 - |z|)
        if n > 2 and abs(term) * ratio_bound / (1.0 - ratio_bound) <= HYP2F1_TERM_TOL * abs(total):
            return total
    raise NumericFailure("2F1 series did not converge", (a, b, c, z), best_estimate=total)


def _pfaff(a: float, b: float, c: float, z: float) -> float:
    """Pfaff transformation z -> z/(z-1), picking the variant whose series converges faster."""
    w = z / (z - 1.0)
    scale_a = (1.0 - z) ** (-a)
    scale_b = (1.0 - z) ** (-b)
    if _is_nonpositive_integer(c - a):
        return scale_b * _gauss_series(c - a, b, c, w)
    if _is_nonpositive_integer(c - b):
        return scale_a * _gauss_series(a, c - b, c, w)
    if a >= b:
        return scale_b * _gauss_series(c - a, b, c, w)
    return scale_a * _gauss_series(a, c - b, c, w)


def _connection_inverse_z(a: float, b: float, c: float, z: float) -> float:
    """Analytic continuation through 1/z; requires a - b not an integer."""
    inv = 1.0 / z
    gc = special.gamma(c)
    t1 = gc * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
    t1 *= (-z) ** (-a) * _gauss_series(a, a - c + 1.0, a - b + 1.0, inv)
    t2 = gc * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
    t2 *= (-z) ** (-b) * _gauss_series(b, b - c + 1.0, b - a + 1.0, inv)
    return float(t1 + t2)


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """
    2F1([a, b]; c; z) on the non-positive real axis.

    Direct series for -1/2 <= z <= 0, Pfaff transformation down to z = -2,
    and the 1/z continuation beyond that (Pfaff again when a - b is an integer,
    where the continuation is degenerate).
    """
    if _is_nonpositive_integer(c):
        raise DomainError(f"c must not be a non-positive integer, got {c}")
    if z > 0:
        raise DomainError(f"gauss_2f1 is only defined here for z <= 0, got {z}")
    if z == 0:
        return 1.0
    if z >= -0.5:
        value = _gauss_series(a, b, c, z)
    elif z >= -2.0 or _is_integer(a - b):
        value = _pfaff(a, b, c, z)
    else:
        value = _connection_inverse_z(a, b, c, z)
        if not math.isfinite(value):
            logger.debug("[gauss_2f1] continuation overflowed for %s, using Pfaff", (a, b, c, z))
            value = _pfaff(a, b, c, z)
    if not math.isfinite(value):
        raise NumericFailure("2F1 evaluation is not finite", (a, b, c, z), best_estimate=value)
    return value


# -------------------------
# Composite Simpson with interval halving
# -------------------------
def _evaluate(f: Callable[[np.ndarray], ArrayLike], x: np.ndarray) -> np.ndarray:
    values = np.asarray(f(x), dtype=float)
    if values.shape[-1:] != x.shape:
        values = np.broadcast_to(values[..., None], values.shape + x.shape)
    return values


def simpson(
    f: Callable[[np.ndarray], ArrayLike],
    a: float,
    b: float,
    spec: QuadratureSpec | None = None,
) -> ArrayLike:
    """
    Composite-Simpson estimate of the integral of f over [a, b].

    f receives a 1-D array of abscissae and returns values whose last axis
    runs along it, so a batch of integrands is integrated in one call. The
    panel count doubles until every component meets the tolerance.
    """
    spec = spec or QuadratureSpec()
    if a > b:
        raise DomainError(f"simpson requires a <= b, got [{a}, {b}]")

    panels = spec.panels
    x = np.linspace(a, b, panels + 1)
    y = _evaluate(f, x)
    if a == b:
        result = np.zeros(y.shape[:-1])
        return float(result) if result.ndim == 0 else result
    if not np.all(np.isfinite(y)):
        raise NumericFailure("integrand is not finite", (a, b, panels))

    step = (b - a) / panels
    estimate = integrate.simpson(y, dx=step, axis=-1)
    while panels < spec.max_panels:
        mid = x[:-1] + 0.5 * step
        y_mid = _evaluate(f, mid)
        if not np.all(np.isfinite(y_mid)):
            raise NumericFailure("integrand is not finite", (a, b, 2 * panels))

        refined_x = np.empty(2 * panels + 1)
        refined_x[0::2] = x
        refined_x[1::2] = mid
        refined_y = np.empty(y.shape[:-1] + (2 * panels + 1,))
        refined_y[..., 0::2] = y
        refined_y[..., 1::2] = y_mid
        x, y = refined_x, refined_y
        panels *= 2
        step *= 0.5

        refined = integrate.simpson(y, dx=step, axis=-1)
        error = np.abs(refined - estimate)
        estimate = refined
        if np.all(error <= np.maximum(spec.abs_tol, spec.rel_tol * np.abs(refined))):
            return float(estimate) if np.ndim(estimate) == 0 else estimate

    raise NumericFailure(
        "Simpson panel cap reached before tolerance was met",
        (a, b, spec.max_panels),
        best_estimate=estimate,
    )


# -------------------------
# Error function and gamma ratios
# -------------------------
def erf(x: ArrayLike) -> ArrayLike:
    value = special.erf(x)
    return float(value) if np.ndim(value) == 0 else value


def log_gamma_ratio(l: int, m: float) -> float:
    """Gamma(l + m) / (l! Gamma(m)), computed through log-gamma."""
    if l < 0 or int(l) != l:
        raise DomainError(f"l must be a non-negative integer, got {l}")
    if m <= 0:
        raise DomainError(f"m must be positive, got {m}")
    return float(np.exp(special.gammaln(l + m) - special.gammaln(l + 1.0) - special.gammaln(m)))


def gamma_ratio_table(m: float, count: int) -> np.ndarray:
    """log_gamma_ratio(l, m) for l = 0 .. count - 1."""
    if m <= 0:
        raise DomainError(f"m must be positive, got {m}")
    l = np.arange(count, dtype=float)
    return np.exp(special.gammaln(l + m) - special.gammaln(l + 1.0) - special.gammaln(m))
