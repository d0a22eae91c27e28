"""
Strong (partial) differentiability by sampled two-point quotients.

For a family g(t, z) and a point (t0, z0), the quotient of a pair (t1, t2, z)
is (g(t2, z) - g(t1, z)) / (t2 - t1). The strong derivative L at (t0, z0) is
the slope these quotients approach when t1, t2 and z all close in on the
point; M(delta) is the sampled sup of |quotient - L| inside radius delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .diffnum import partial, stencil_margin
from .exceptions import EvalError, InsufficientSamples
from .funcs import Function2D
from .parallel import pmap

logger = logging.getLogger(__name__)

Family = Callable[[float, float], float]

DEFAULT_RADII = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
THEOREM1_RADII = (1e-2, 3e-3, 1e-3, 3e-4)
SHRINK = 0.999
GRID_POINTS = 9
GRID_Z = 3
LOCAL_SEPARATIONS = (1, 2, 4)

YES = 'yes'
NO = 'no'
INCONCLUSIVE = 'inconclusive'


# ==============================================================================
# FAMILIES
# ==============================================================================

def family(fn: Callable[[float], float]) -> Family:
    """A one-variable function as a family that ignores its parameter."""
    return lambda t, z: fn(t)


def slice_family(f: Function2D, axis: str) -> Family:
    """t runs along axis, z is the other coordinate."""
    if axis == 'x':
        return lambda t, z: f(t, z)
    if axis == 'y':
        return lambda t, z: f(z, t)
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def _safe(g: Family, t: float, z: float) -> float:
    try:
        value = float(g(t, z))
    except (ArithmeticError, ValueError):
        return math.nan
    return value if math.isfinite(value) else math.nan


# ==============================================================================
# SAMPLER
# ==============================================================================

class PairSample(NamedTuple):
    t1: np.ndarray
    t2: np.ndarray
    z: np.ndarray


def _toward_centre(t: np.ndarray, t0: float) -> np.ndarray:
    return np.where(t > t0, -1.0, 1.0)


def sample_pairs(point, delta: float, min_separation: float, seed,
                 pairs_per_radius: int = 128) -> PairSample:
    """
    Pairs inside radius delta of point, all at least min_separation apart.

    A deterministic part (an 11-point grid in t with near-edge points, three z
    values, all admissible grid pairs and short pairs from every grid point)
    is followed by seeded random pairs: half with log-uniform short
    separations, half spread over the whole window.
    """
    t0, z0 = point
    reach = SHRINK * delta
    rng = np.random.default_rng(seed)

    ts = np.concatenate([np.linspace(t0 - reach, t0 + reach, GRID_POINTS),
                         [t0 - 0.99 * reach, t0 + 0.99 * reach]])
    zs = np.linspace(z0 - reach, z0 + reach, GRID_Z)
    t1, t2, z = [], [], []

    i, j = np.triu_indices(len(ts), k=1)
    keep = np.abs(ts[j] - ts[i]) >= min_separation
    for zv in zs:
        t1.append(ts[i][keep])
        t2.append(ts[j][keep])
        z.append(np.full(keep.sum(), zv))

    for factor in LOCAL_SEPARATIONS:
        s = factor * min_separation
        for zv in zs:
            t1.append(ts)
            t2.append(ts + _toward_centre(ts, t0) * s)
            z.append(np.full(len(ts), zv))

    n_local = pairs_per_radius // 2
    n_far = pairs_per_radius - n_local

    anchors = rng.uniform(t0 - reach, t0 + reach, n_local)
    seps = min_separation * 2.0 ** rng.uniform(0.0, 2.0, n_local)
    t1.append(anchors)
    t2.append(anchors + _toward_centre(anchors, t0) * seps)
    z.append(rng.uniform(z0 - reach, z0 + reach, n_local))

    a = rng.uniform(t0 - reach, t0 + reach, n_far)
    b = rng.uniform(t0 - reach, t0 + reach, n_far)
    b = np.where(np.abs(b - a) >= min_separation, b, a + _toward_centre(a, t0) * min_separation)
    t1.append(a)
    t2.append(b)
    z.append(rng.uniform(z0 - reach, z0 + reach, n_far))

    return PairSample(np.concatenate(t1), np.concatenate(t2), np.concatenate(z))


class _RadiusQuotients(NamedTuple):
    quotients: np.ndarray
    attempted: int
    failed: int


def _validate_radii(radii) -> list:
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("radii must not be empty")
    if any(not r > 0 for r in radii):
        raise ValueError(f"radii must be positive, got {radii}")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii must be strictly decreasing, got {radii}")
    return radii


def _sample_quotients(g: Family, point, radii, seed, pairs_per_radius, separation_factor,
                      max_failed_fraction) -> list:
    if pairs_per_radius < 16:
        raise ValueError(f"pairs_per_radius must be >= 16, got {pairs_per_radius}")
    if not 0 < separation_factor <= 0.2:
        raise ValueError(f"separation factor must lie in (0, 0.2], got {separation_factor}")
    point = (float(point[0]), float(point[1]))
    streams = np.random.SeedSequence(seed).spawn(len(radii))

    samples = [sample_pairs(point, r, separation_factor * r, stream, pairs_per_radius)
               for r, stream in zip(radii, streams)]
    wanted = sorted({(float(t), float(z))
                     for s in samples for t, z in zip(np.concatenate([s.t1, s.t2]), np.concatenate([s.z, s.z]))})
    values = dict(zip(wanted, pmap(lambda tz: _safe(g, tz[0], tz[1]), wanted)))

    out = []
    for r, s in zip(radii, samples):
        g1 = np.array([values[(float(t), float(z))] for t, z in zip(s.t1, s.z)])
        g2 = np.array([values[(float(t), float(z))] for t, z in zip(s.t2, s.z)])
        ok = np.isfinite(g1) & np.isfinite(g2)
        failed = int((~ok).sum())
        attempted = len(ok)
        if failed > max_failed_fraction * attempted or failed == attempted:
            raise InsufficientSamples(
                f"{failed} of {attempted} pairs failed at radius {r:g} around {point}"
            )
        if failed:
            logger.debug(f"radius {r:g}: skipped {failed} of {attempted} pairs")
        quotients = (g2[ok] - g1[ok]) / (s.t2[ok] - s.t1[ok])
        out.append(_RadiusQuotients(quotients, attempted, failed))
    return out


# ==============================================================================
# MODULUS, ESTIMATE, VERDICT
# ==============================================================================

class StrongEstimate(NamedTuple):
    slope: float
    modulus: float


@dataclass(frozen=True)
class ModulusCurve:
    point: tuple
    axis: str
    candidate_L: float
    radii: list
    modulus: list
    pair_count: list
    failed_count: list
    min_separation: float

    def rows(self) -> list:
        return [(r, m, n) for r, m, n in zip(self.radii, self.modulus, self.pair_count)]


def _curve(point, axis, L, radii, per_radius, separation_factor) -> ModulusCurve:
    own = [float(np.max(np.abs(rq.quotients - L))) for rq in per_radius]
    counts = [len(rq.quotients) for rq in per_radius]
    # sample sets are nested: the set at a radius includes all smaller ones
    modulus = list(np.maximum.accumulate(own[::-1])[::-1])
    pair_count = list(np.cumsum(counts[::-1])[::-1])
    return ModulusCurve(
        point=(float(point[0]), float(point[1])),
        axis=axis,
        candidate_L=float(L),
        radii=list(radii),
        modulus=[float(m) for m in modulus],
        pair_count=[int(n) for n in pair_count],
        failed_count=[rq.failed for rq in per_radius],
        min_separation=separation_factor * radii[-1],
    )


def chebyshev_centre(quotients: np.ndarray) -> StrongEstimate:
    lo, hi = float(np.min(quotients)), float(np.max(quotients))
    return StrongEstimate(slope=(lo + hi) / 2.0, modulus=(hi - lo) / 2.0)


def strong_modulus(g: Family, point, candidate_L: float, radii=DEFAULT_RADII,
                   sampler_seed: int = 42, pairs_per_radius: int = 128, axis: str = 'x',
                   separation_factor: float = 1e-3,
                   max_failed_fraction: float = 0.5) -> ModulusCurve:
    radii = _validate_radii(radii)
    per_radius = _sample_quotients(g, point, radii, sampler_seed, pairs_per_radius,
                                   separation_factor, max_failed_fraction)
    return _curve(point, axis, candidate_L, radii, per_radius, separation_factor)


def estimate_strong_derivative(g: Family, point, delta: float, sampler_seed: int = 42,
                               pairs_per_radius: int = 128, separation_factor: float = 1e-3,
                               max_failed_fraction: float = 0.5) -> StrongEstimate:
    """The Chebyshev centre of the quotients sampled at radius delta."""
    radii = _validate_radii([delta])
    (rq,) = _sample_quotients(g, point, radii, sampler_seed, pairs_per_radius,
                              separation_factor, max_failed_fraction)
    return chebyshev_centre(rq.quotients)


@dataclass(frozen=True)
class Verdict:
    outcome: str
    evidence: Optional[ModulusCurve]
    eta: float
    factor: float
    reason: str = ''


def is_strongly_differentiable(g: Family, point, radii=DEFAULT_RADII, eta: float = 1e-3,
                               factor: float = 10.0, sampler_seed: int = 42,
                               pairs_per_radius: int = 128, axis: str = 'x',
                               separation_factor: float = 1e-3) -> Verdict:
    """
    yes: M(delta_min) <= eta and M never grows as delta shrinks.
    no:  M(delta) >= factor * eta at every radius.
    Anything else, or too many failed samples, is inconclusive.
    """
    radii = _validate_radii(radii)
    if len(radii) < 4 or radii[0] / radii[-1] < 100.0 * (1 - 1e-12):
        raise ValueError(f"radii need >= 4 entries spanning >= 2 decades, got {radii}")
    if not eta > 0 or not factor > 1:
        raise ValueError(f"need eta > 0 and factor > 1, got {eta}, {factor}")
    try:
        per_radius = _sample_quotients(g, point, radii, sampler_seed, pairs_per_radius,
                                       separation_factor, 0.5)
    except InsufficientSamples as exc:
        logger.warning(f"strong differentiability at {point} inconclusive: {exc}")
        return Verdict(INCONCLUSIVE, None, eta, factor, reason=str(exc))

    L = chebyshev_centre(per_radius[-1].quotients).slope
    curve = _curve(point, axis, L, radii, per_radius, separation_factor)
    m = curve.modulus
    monotone = all(small <= large * (1 + 1e-9) + 1e-15 for large, small in zip(m, m[1:]))
    if m[-1] <= eta and monotone:
        outcome, reason = YES, f"M({radii[-1]:g}) = {m[-1]:.3e} <= eta"
    elif min(m) >= factor * eta:
        outcome, reason = NO, f"M(delta) >= {factor:g} * eta at every radius"
    else:
        outcome, reason = INCONCLUSIVE, f"M({radii[-1]:g}) = {m[-1]:.3e} is between the thresholds"
    logger.info(f"strong differentiability at {curve.point} along {axis}: {outcome} (L = {L:.6g})")
    return Verdict(outcome, curve, eta, factor, reason)


# ==============================================================================
# MIXED PARTIALS OF A STRONGLY DIFFERENTIABLE FIRST PARTIAL
# ==============================================================================

@dataclass(frozen=True)
class Theorem1Report:
    point: tuple
    radii: list
    tol: float
    strong_d21: StrongEstimate
    strong_d12: StrongEstimate
    existence_fraction_of_A: float
    census: int
    equality_gap: float
    d21_curve: ModulusCurve
    d12_curve: ModulusCurve


class _AProxy:
    """d2 f where its estimate settles; the points visited form the census."""

    def __init__(self, f: Function2D, tol: float):
        self.f = f
        self.limit = 10.0 * tol
        self.members = {}

    def __call__(self, t: float, z: float) -> float:
        estimate = partial(self.f, 'y', (t, z), scheme='richardson')
        settled = (not estimate.excluded and not estimate.kinked
                   and estimate.error_indicator <= self.limit)
        self.members[(t, z)] = settled
        if not settled:
            raise EvalError(f"d2 f not settled at {(t, z)}")
        return estimate.value

    @property
    def fraction(self) -> float:
        if not self.members:
            return 0.0
        return sum(self.members.values()) / len(self.members)


def verify_theorem1(f: Function2D, p, radii=THEOREM1_RADII, tol: float = 1e-5,
                    sampler_seed: int = 42, pairs_per_radius: int = 128,
                    separation_factor: float = 0.1) -> Theorem1Report:
    """
    Strong d21 f(p) from the quotients of d1 f along y, and strong d12 f(p)
    from the quotients of d2 f along x restricted to points where d2 f
    settles (the A-proxy). Both slopes are the Chebyshev centres at the
    smallest radius.
    """
    radii = _validate_radii(radii)
    x0, y0 = float(p[0]), float(p[1])
    if not f.domain.contains(x0, y0, margin=radii[0] + stencil_margin(f.domain)):
        raise ValueError(f"{(x0, y0)} is not interior to {f.domain} for radius {radii[0]}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    def g1(t, z):
        estimate = partial(f, 'x', (z, t), scheme='richardson')
        if estimate.excluded:
            raise EvalError(f"d1 f excluded at {(z, t)}")
        return estimate.value

    first = _sample_quotients(g1, (y0, x0), radii, sampler_seed, pairs_per_radius,
                              separation_factor, 0.5)
    strong_d21 = chebyshev_centre(first[-1].quotients)
    d21_curve = _curve((y0, x0), 'y', strong_d21.slope, radii, first, separation_factor)

    a_proxy = _AProxy(f, tol)
    try:
        second = _sample_quotients(a_proxy, (x0, y0), radii, sampler_seed, pairs_per_radius,
                                   separation_factor, 1.0)
    except InsufficientSamples as exc:
        raise InsufficientSamples(f"no A-proxy points accumulate at {(x0, y0)}: {exc}") from exc
    strong_d12 = chebyshev_centre(second[-1].quotients)
    d12_curve = _curve((x0, y0), 'x', strong_d12.slope, radii, second, separation_factor)

    report = Theorem1Report(
        point=(x0, y0),
        radii=radii,
        tol=tol,
        strong_d21=strong_d21,
        strong_d12=strong_d12,
        existence_fraction_of_A=a_proxy.fraction,
        census=len(a_proxy.members),
        equality_gap=abs(strong_d21.slope - strong_d12.slope),
        d21_curve=d21_curve,
        d12_curve=d12_curve,
    )
    logger.info(
        f"{f.label} at {(x0, y0)}: strong d21 = {strong_d21.slope:.6g}, "
        f"strong d12 = {strong_d12.slope:.6g}, gap = {report.equality_gap:.3e}"
    )
    return report
