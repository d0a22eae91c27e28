"""
Sampled Lipschitz constants of one-variable functions and of derivative
slices of a bivariate function, uniformly over the slices.

A sampled constant is a lower bound of the true one; reports carry sample
counts and the trend over sample doublings so the user can judge convergence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .diffnum import AXES, first_step, partial, schwarz_audit, SchwarzAuditReport
from .exceptions import EmptyReport, EvalError, ExcludedSlice
from .funcs import Function2D, Rectangle
from .parallel import pmap

logger = logging.getLogger(__name__)

SEPARATION = 1e-6
MAX_FAILED = 0.5
TREND_DOUBLINGS = 3
NOISE_ULPS = 4.0


class LipschitzEstimate(NamedTuple):
    k_hat: float
    witness_pair: tuple
    samples: int
    failed: int
    # |g(b) - g(a)| / |b - a| at the witness pair before the noise is taken off
    witness_quotient: float = math.nan


class NoisyValue(NamedTuple):
    """A sample known only to within +-noise; quotients give the noise back."""
    value: float
    noise: float


def _evaluate(g, t: float) -> tuple:
    try:
        result = g(t)
    except (ArithmeticError, ValueError):
        return np.nan, 0.0
    if isinstance(result, NoisyValue):
        return float(result.value), float(result.noise)
    return float(result), 0.0


def _sample_points(interval, n_samples: int, seed: int) -> np.ndarray:
    lo, hi = interval
    rng = np.random.default_rng(seed)
    return np.concatenate([np.linspace(lo, hi, n_samples), rng.uniform(lo, hi, n_samples)])


def lipschitz_estimate(g: Callable[[float], float], interval, n_samples: int = 64,
                       seed: int = 42) -> LipschitzEstimate:
    """
    Max two-point quotient over n_samples grid points plus n_samples seeded
    uniform points, for pairs at least length * 1e-6 apart.

    g may return NoisyValue; each pair's |g(t2) - g(t1)| is then reduced by
    both noises so the quotient stays a lower bound of the true constant,
    and k_hat sits below witness_quotient by at most that noise over |b - a|.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"interval must satisfy lo < hi, got {interval!r}")
    if n_samples < 8:
        raise ValueError(f"n_samples must be >= 8, got {n_samples}")

    ts = _sample_points((lo, hi), n_samples, seed)
    evaluated = np.array([_evaluate(g, float(t)) for t in ts])
    values, noise = evaluated[:, 0], evaluated[:, 1]
    ok = np.isfinite(values) & np.isfinite(noise)
    failed = int((~ok).sum())
    if failed > MAX_FAILED * len(ts):
        raise ExcludedSlice(f"{failed} of {len(ts)} evaluations failed on [{lo:g}, {hi:g}]")
    ts, values, noise = ts[ok], values[ok], noise[ok]

    dt = ts[None, :] - ts[:, None]
    raw = np.abs(values[None, :] - values[:, None])
    dg = raw - (noise[None, :] + noise[:, None])
    admissible = np.triu(np.abs(dt) >= SEPARATION * (hi - lo), k=1)
    if not admissible.any():
        raise ExcludedSlice(f"no admissible pairs on [{lo:g}, {hi:g}]")
    dg = np.maximum(dg, 0.0)
    quotients = np.where(admissible, dg / np.where(admissible, np.abs(dt), 1.0), -1.0)
    i, j = np.unravel_index(np.argmax(quotients), quotients.shape)
    return LipschitzEstimate(
        k_hat=float(quotients[i, j]),
        witness_pair=(float(ts[i]), float(ts[j])),
        samples=len(ts),
        failed=failed,
        witness_quotient=float(raw[i, j] / abs(dt[i, j])),
    )


def sample_trend(g, interval, n_samples: int, seed: int = 42,
                 doublings: int = TREND_DOUBLINGS) -> list:
    """(n, K_hat) for n, 2n-1, 4n-3, ...: nested grids with a shared seeded prefix."""
    trend, n = [], n_samples
    for _ in range(doublings):
        trend.append((n, lipschitz_estimate(g, interval, n, seed).k_hat))
        n = 2 * n - 1
    return trend


# ==============================================================================
# UNIFORM LIPSCHITZ BOUND OF A DERIVATIVE
# ==============================================================================

class SliceResult(NamedTuple):
    coordinate: float
    k_hat: float
    excluded: bool


@dataclass(frozen=True)
class UniformLipschitzReport:
    derivative_axis: str
    lipschitz_axis: str
    K_hat: float
    worst_slice: float
    witness_pair: tuple
    witness_quotient: float
    slices_tested: int
    excluded_slices: int
    samples: int
    slices: list
    trend: list


def _other(axis: str) -> str:
    return 'y' if axis == 'x' else 'x'


def _slice_coordinates(lo: float, hi: float, n_slices: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    uniform = np.linspace(lo, hi, n_slices)
    extra = rng.uniform(lo, hi, math.ceil(n_slices / 2))
    return [float(c) for c in np.concatenate([uniform, extra])]


def derivative_slice(f: Function2D, derivative_axis: str, lipschitz_axis: str,
                     coordinate: float) -> Callable[[float], float]:
    """t -> d_{derivative_axis} f, with t along lipschitz_axis and the other coordinate fixed."""

    def g(t):
        p = (coordinate, t) if lipschitz_axis == 'y' else (t, coordinate)
        estimate = partial(f, derivative_axis, p)
        if estimate.excluded:
            raise EvalError(f"d{derivative_axis} f excluded at {p}")
        return NoisyValue(estimate.value, NOISE_ULPS * estimate.rounding)

    return g


def uniform_partial_lipschitz(f: Function2D, derivative_axis: str = 'x',
                              lipschitz_axis: str = 'y', rect: Optional[Rectangle] = None,
                              n_slices: int = 9, n_samples: int = 64,
                              seed: int = 42) -> UniformLipschitzReport:
    """
    K_hat = max over slices of the sampled Lipschitz constant of the derivative
    along lipschitz_axis. Slices sit at fixed values of the other coordinate:
    n_slices uniform ones and ceil(n_slices / 2) seeded random ones.
    """
    if derivative_axis not in AXES or lipschitz_axis not in AXES:
        raise ValueError(f"axes must be in {AXES}")
    if derivative_axis == lipschitz_axis:
        raise ValueError("derivative and Lipschitz axes must differ")
    if n_slices < 3:
        raise ValueError(f"n_slices must be >= 3, got {n_slices}")
    rect = f.domain if rect is None else rect

    slice_axis = _other(lipschitz_axis)
    margin = 2 * first_step(max(abs(v) for v in rect.as_tuple()))
    lo, hi = (rect.a, rect.b) if slice_axis == 'x' else (rect.c, rect.d)
    interval = (rect.c, rect.d) if lipschitz_axis == 'y' else (rect.a, rect.b)
    coordinates = _slice_coordinates(lo + margin, hi - margin, n_slices, seed)

    def run(coordinate):
        g = derivative_slice(f, derivative_axis, lipschitz_axis, coordinate)
        try:
            return lipschitz_estimate(g, interval, n_samples, seed)
        except ExcludedSlice as exc:
            logger.debug(f"slice {slice_axis}={coordinate:g} excluded: {exc}")
            return None

    estimates = pmap(run, coordinates)
    slices = [SliceResult(c, e.k_hat if e else math.nan, e is None)
              for c, e in zip(coordinates, estimates)]
    tested = [(c, e) for c, e in zip(coordinates, estimates) if e is not None]
    if not tested:
        raise EmptyReport(f"every slice of {f.label} was excluded")

    worst, best = tested[0]
    for c, e in tested[1:]:
        if e.k_hat > best.k_hat:
            worst, best = c, e

    def lift(t):
        return (worst, t) if lipschitz_axis == 'y' else (t, worst)

    trend = sample_trend(derivative_slice(f, derivative_axis, lipschitz_axis, worst),
                         interval, n_samples, seed)
    report = UniformLipschitzReport(
        derivative_axis=derivative_axis,
        lipschitz_axis=lipschitz_axis,
        K_hat=best.k_hat,
        worst_slice=worst,
        witness_pair=(lift(best.witness_pair[0]), lift(best.witness_pair[1])),
        witness_quotient=best.witness_quotient,
        slices_tested=len(coordinates),
        excluded_slices=len(coordinates) - len(tested),
        samples=best.samples,
        slices=slices,
        trend=trend,
    )
    logger.info(
        f"d{derivative_axis} {f.label} Lipschitz in {lipschitz_axis}: K_hat = {report.K_hat:.6g} "
        f"at {slice_axis} = {worst:.6g} ({report.excluded_slices} of {len(coordinates)} slices excluded)"
    )
    return report


# ==============================================================================
# BOTH HYPOTHESES AND THE MIXED-DERIVATIVE BOUND
# ==============================================================================

@dataclass(frozen=True)
class LipschitzEquivalenceReport:
    d1_in_y: UniformLipschitzReport
    d2_in_x: UniformLipschitzReport
    audit: SchwarzAuditReport
    max_abs_d21: float
    max_abs_d12: float
    d21_bounded: bool
    d12_bounded: bool


def lipschitz_equivalence(f: Function2D, rect: Optional[Rectangle] = None, n_slices: int = 9,
                          n_samples: int = 64, tol: float = 1e-5, seed: int = 42,
                          grid: tuple = (21, 21)) -> LipschitzEquivalenceReport:
    """
    d1 f Lipschitz in y uniformly in x, d2 f Lipschitz in x uniformly in y,
    and a Schwarz audit whose mixed derivatives must stay within those constants.
    """
    rect = f.domain if rect is None else rect
    d1_in_y = uniform_partial_lipschitz(f, 'x', 'y', rect, n_slices, n_samples, seed)
    d2_in_x = uniform_partial_lipschitz(f, 'y', 'x', rect, n_slices, n_samples, seed)
    audit = schwarz_audit(f, rect, grid[0], grid[1], tol)
    kept = [n for n in audit.nodes if math.isfinite(n.d21) and math.isfinite(n.d12)]
    max_d21 = max((abs(n.d21) for n in kept), default=math.nan)
    max_d12 = max((abs(n.d12) for n in kept), default=math.nan)
    return LipschitzEquivalenceReport(
        d1_in_y=d1_in_y,
        d2_in_x=d2_in_x,
        audit=audit,
        max_abs_d21=max_d21,
        max_abs_d12=max_d12,
        d21_bounded=bool(max_d21 <= d1_in_y.K_hat + tol),
        d12_bounded=bool(max_d12 <= d2_in_x.K_hat + tol),
    )
