"""
f(x, y) = integral over [a, x] x [c, y] of a density h, built by composite
Simpson quadrature, and the numeric checks that its first partials are the
single integrals of h and its mixed partials are h.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .diffnum import mixed_iterated, partial
from .exceptions import EvalError, QuadratureFailure
from .funcs import Function2D, Rectangle
from .parallel import pmap

logger = logging.getLogger(__name__)

MAX_FAILED_NODES = 0.01
# step halvings of the mixed-partial stencils on f
MIXED_CHECK_LEVELS = 2

# fractional position of a sample inside its cell (golden section); keeps
# samples off round coordinates such as 1/2 and off panel edges
SAMPLE_OFFSET = (3.0 - math.sqrt(5.0)) / 2.0

PASS = 'pass'
MISMATCH = 'mismatch'
FLAGGED = 'flagged'


@dataclass(frozen=True)
class QuadratureSpec:
    panels_per_unit: int = 64
    refinement_levels: int = 1

    def __post_init__(self):
        if self.panels_per_unit < 8 or self.panels_per_unit % 2:
            raise ValueError(f"panels_per_unit must be even and >= 8, got {self.panels_per_unit}")
        if self.refinement_levels < 1:
            raise ValueError(f"refinement_levels must be >= 1, got {self.refinement_levels}")

    def refined(self, level: int) -> 'QuadratureSpec':
        return QuadratureSpec(self.panels_per_unit * 2 ** level, 1)


class _SimpsonAxis:
    """Fixed Simpson panels on [lo, hi]; rules up to any t add one partial panel."""

    def __init__(self, lo: float, hi: float, panels_per_unit: int):
        self.lo, self.hi = lo, hi
        self.panels = max(1, math.ceil(panels_per_unit * (hi - lo)))
        self.width = (hi - lo) / self.panels
        self.nodes = np.linspace(lo, hi, 2 * self.panels + 1)
        self.full_weights = np.zeros(2 * self.panels + 1)
        self.full_weights[0::2] = self.width / 3.0
        self.full_weights[1::2] = 2.0 * self.width / 3.0

    def rule(self, t: float) -> tuple:
        """
        (count, weights, extra_nodes, extra_weights): the first `count` global
        nodes with `weights`, plus the interior and end node of the partial panel.
        """
        if not self.lo <= t <= self.hi:
            raise EvalError(f"{t} outside [{self.lo}, {self.hi}]")
        k = min(int((t - self.lo) / self.width), self.panels)
        while k > 0 and self.nodes[2 * k] > t:
            k -= 1
        edge = self.nodes[2 * k]
        weights = self.full_weights[:2 * k + 1].copy()
        if k > 0:
            weights[0] = weights[-1] = self.width / 6.0
        else:
            weights[0] = 0.0
        s = t - edge
        if s <= 0:
            return 2 * k + 1, weights, np.empty(0), np.empty(0)
        weights[-1] += s / 6.0
        return 2 * k + 1, weights, np.array([edge + s / 2.0, t]), np.array([4.0 * s / 6.0, s / 6.0])


class DensityIntegral:
    """The evaluator of f; densities are sampled once on the global panel grid."""

    def __init__(self, h: Function2D, rect: Rectangle, spec: QuadratureSpec):
        self.h = h
        self.rect = rect
        self.spec = spec
        self.u = _SimpsonAxis(rect.a, rect.b, spec.panels_per_unit)
        self.v = _SimpsonAxis(rect.c, rect.d, spec.panels_per_unit)
        self.grid = h.evaluate_grid(self.u.nodes[:, None], self.v.nodes[None, :])
        failed = int(np.isnan(self.grid).sum())
        if failed > MAX_FAILED_NODES * self.grid.size:
            raise QuadratureFailure(
                f"{h.label}: {failed} of {self.grid.size} panel nodes failed on {rect}"
            )
        if failed:
            logger.warning(f"{h.label}: skipping {failed} failed panel nodes")

    def _block(self, us, vs, cached: Optional[tuple] = None) -> tuple:
        if cached is not None:
            values = self.grid[:cached[0], :cached[1]]
        else:
            values = self.h.evaluate_grid(us[:, None], vs[None, :])
        bad = np.isnan(values)
        return np.where(bad, 0.0, values), int(bad.sum()), values.size

    def double(self, x: float, y: float) -> float:
        nu, wu, eu, ewu = self.u.rule(x)
        nv, wv, ev, ewv = self.v.rule(y)
        gu, gv = self.u.nodes[:nu], self.v.nodes[:nv]
        total, failed, used = 0.0, 0, 0
        for us, uw, vs, vw, cached in (
            (gu, wu, gv, wv, (nu, nv)),
            (gu, wu, ev, ewv, None),
            (eu, ewu, gv, wv, None),
            (eu, ewu, ev, ewv, None),
        ):
            if not len(us) or not len(vs):
                continue
            values, bad, size = self._block(us, vs, cached)
            total += float(uw @ values @ vw)
            failed += bad
            used += size
        self._check(failed, used, (x, y))
        return total

    def single_in_v(self, x: float, y: float) -> float:
        """integral over [c, y] of h(x, v) dv, with the v rule of f."""
        nv, wv, ev, ewv = self.v.rule(y)
        vs = np.concatenate([self.v.nodes[:nv], ev])
        weights = np.concatenate([wv, ewv])
        return self._line(np.full(len(vs), x), vs, weights, (x, y))

    def single_in_u(self, x: float, y: float) -> float:
        """integral over [a, x] of h(u, y) du, with the u rule of f."""
        nu, wu, eu, ewu = self.u.rule(x)
        us = np.concatenate([self.u.nodes[:nu], eu])
        weights = np.concatenate([wu, ewu])
        return self._line(us, np.full(len(us), y), weights, (x, y))

    def _line(self, us, vs, weights, at) -> float:
        values = self.h.evaluate_grid(us, vs)
        bad = np.isnan(values)
        self._check(int(bad.sum()), len(values), at)
        return float(np.where(bad, 0.0, values) @ weights)

    def _check(self, failed: int, used: int, at):
        if used and failed > MAX_FAILED_NODES * used:
            raise QuadratureFailure(f"{self.h.label}: {failed} of {used} nodes failed at {at}")


def integrate_density(h: Function2D, rect: Optional[Rectangle] = None,
                      spec: Optional[QuadratureSpec] = None) -> Function2D:
    """
    The nested integral of h as a Function2D on rect. Its oracles are the
    single integrals (first partials) and h itself (both mixed partials).
    """
    rect = h.domain if rect is None else rect
    spec = QuadratureSpec() if spec is None else spec
    integral = DensityIntegral(h, rect, spec)

    def density(x, y):
        return h(x, y)

    return Function2D(
        evaluator=integral.double,
        domain=rect,
        label=f"integral({h.label})",
        oracle_d1=integral.single_in_v,
        oracle_d2=integral.single_in_u,
        oracle_d21=density,
        oracle_d12=density,
    )


# ==============================================================================
# CHECKS
# ==============================================================================

def sample_axis(lo: float, hi: float, n: int) -> np.ndarray:
    """One sample per cell of n equal cells, SAMPLE_OFFSET of the way in."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return lo + (np.arange(n) + SAMPLE_OFFSET) * (hi - lo) / n


def difference_steps(lo: float, hi: float, spec: QuadratureSpec) -> tuple:
    """
    (inner, outer) starting steps for the mixed partials of f along one axis,
    powers of two at or below 1/16 and 1/8 of the panel width.
    """
    panels = max(1, math.ceil(spec.panels_per_unit * (hi - lo)))
    inner = 2.0 ** math.floor(math.log2((hi - lo) / panels / 16))
    return inner, 2.0 * inner


def _flagged(*estimates) -> bool:
    return any(e.excluded or e.kinked for e in estimates)


class Lemma1Point(NamedTuple):
    x: float
    y: float
    d1: float
    integral: float
    gap: float
    status: str


@dataclass(frozen=True)
class Lemma1Report:
    x_samples: list
    y_samples: list
    tol: float
    max_gap: float
    pass_fraction: float
    flagged_fraction: float
    points: list = field(repr=False)


def _fractions(statuses: list) -> tuple:
    total = len(statuses)
    flagged = statuses.count(FLAGGED)
    judged = total - flagged
    passed = statuses.count(PASS)
    return (passed / judged if judged else math.nan), flagged / total


def verify_lemma1(h: Function2D, rect: Optional[Rectangle] = None,
                  spec: Optional[QuadratureSpec] = None, nx: int = 21, ny: int = 21,
                  tol: float = 1e-4) -> Lemma1Report:
    """d1 f against the single integral of h(x, .) at offset samples."""
    rect = h.domain if rect is None else rect
    f = integrate_density(h, rect, spec)
    xs, ys = sample_axis(rect.a, rect.b, nx), sample_axis(rect.c, rect.d, ny)

    def check(pt):
        x, y = pt
        estimate = partial(f, 'x', pt)
        reference = f.oracle_d1(x, y)
        gap = abs(estimate.value - reference)
        if _flagged(estimate):
            status = FLAGGED
        else:
            status = PASS if gap <= tol else MISMATCH
        return Lemma1Point(x, y, estimate.value, reference, gap, status)

    points = pmap(check, [(float(x), float(y)) for y in ys for x in xs])
    judged = [p.gap for p in points if p.status != FLAGGED]
    pass_fraction, flagged_fraction = _fractions([p.status for p in points])
    report = Lemma1Report(
        x_samples=[float(x) for x in xs],
        y_samples=[float(y) for y in ys],
        tol=tol,
        max_gap=max(judged) if judged else math.nan,
        pass_fraction=pass_fraction,
        flagged_fraction=flagged_fraction,
        points=points,
    )
    logger.info(f"lemma check of {h.label}: max gap {report.max_gap:.3e}, "
                f"pass fraction {report.pass_fraction:.3f}")
    return report


class Theorem2Point(NamedTuple):
    x: float
    y: float
    gap_a1: float
    gap_a2: float
    gap_d21: float
    gap_d12: float
    status: str


@dataclass(frozen=True)
class Theorem2Report:
    nx: int
    ny: int
    tol: float
    panels_per_unit: int
    gap_a1: float
    gap_a2: float
    gap_d21: float
    gap_d12: float
    pass_fraction: float
    flagged_fraction: float
    slices: list
    points: list = field(repr=False)

    @property
    def mixed_gap(self) -> float:
        return max(self.gap_d21, self.gap_d12)


def verify_theorem2(h: Function2D, rect: Optional[Rectangle] = None,
                    spec: Optional[QuadratureSpec] = None, nx: int = 21, ny: int = 21,
                    tol: float = 1e-3) -> Theorem2Report:
    """
    First partials of f against the single integrals, both mixed partials
    against h. A point passes when both mixed gaps are within tol.
    """
    rect = h.domain if rect is None else rect
    spec = QuadratureSpec() if spec is None else spec
    f = integrate_density(h, rect, spec)
    xs, ys = sample_axis(rect.a, rect.b, nx), sample_axis(rect.c, rect.d, ny)
    hx, kx = difference_steps(rect.a, rect.b, spec)
    hy, ky = difference_steps(rect.c, rect.d, spec)

    def check(pt):
        x, y = pt
        d1, d2 = partial(f, 'x', pt), partial(f, 'y', pt)
        d21 = mixed_iterated(f, ('x', 'y'), pt, outer_step=ky, inner_step=hx,
                             levels=MIXED_CHECK_LEVELS)
        d12 = mixed_iterated(f, ('y', 'x'), pt, outer_step=kx, inner_step=hy,
                             levels=MIXED_CHECK_LEVELS)
        try:
            target = h(x, y)
        except EvalError:
            target = math.nan
        gaps = (
            abs(d1.value - f.oracle_d1(x, y)),
            abs(d2.value - f.oracle_d2(x, y)),
            abs(d21.value - target),
            abs(d12.value - target),
        )
        if _flagged(d1, d2, d21, d12) or not math.isfinite(target):
            status = FLAGGED
        else:
            status = PASS if gaps[2] <= tol and gaps[3] <= tol else MISMATCH
        return Theorem2Point(x, y, *gaps, status)

    points = pmap(check, [(float(x), float(y)) for y in ys for x in xs])
    judged = [p for p in points if p.status != FLAGGED]

    def worst(name):
        return max((getattr(p, name) for p in judged), default=math.nan)

    # one summary per fixed x: the share of its y samples that pass
    slices = []
    for i, x in enumerate(xs):
        column = points[i::nx]
        slices.append({
            'x': float(x),
            'pass_fraction': sum(p.status == PASS for p in column) / len(column),
            'flagged': sum(p.status == FLAGGED for p in column),
        })

    pass_fraction, flagged_fraction = _fractions([p.status for p in points])
    report = Theorem2Report(
        nx=nx, ny=ny, tol=tol, panels_per_unit=spec.panels_per_unit,
        gap_a1=worst('gap_a1'), gap_a2=worst('gap_a2'),
        gap_d21=worst('gap_d21'), gap_d12=worst('gap_d12'),
        pass_fraction=pass_fraction, flagged_fraction=flagged_fraction,
        slices=slices, points=points,
    )
    logger.info(f"mixed check of {h.label} ({spec.panels_per_unit} panels/unit): "
                f"gap d21 {report.gap_d21:.3e}, gap d12 {report.gap_d12:.3e}")
    return report


def theorem2_convergence(h: Function2D, rect: Optional[Rectangle] = None,
                         spec: Optional[QuadratureSpec] = None, nx: int = 11, ny: int = 11,
                         tol: float = 1e-3) -> list:
    """(panels_per_unit, max mixed gap) for each of spec.refinement_levels panel doublings."""
    spec = QuadratureSpec() if spec is None else spec
    return [
        (level_spec.panels_per_unit,
         verify_theorem2(h, rect, level_spec, nx, ny, tol).mixed_gap)
        for level_spec in (spec.refined(level) for level in range(spec.refinement_levels))
    ]
