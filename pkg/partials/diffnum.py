"""
Finite-difference estimates of first and mixed second partial derivatives,
grid Schwarz audits, oracle comparisons and the classical sufficient
conditions (Schwarz, Peano, Young) as numeric predicates.

Steps are powers of two and every quotient divides by the realised spacing,
so the central quotient is exact on linear functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import EvalError
from .funcs import Function2D, Rectangle
from .parallel import pmap

logger = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
AXES = ('x', 'y')
SCHEMES = ('central', 'forward', 'backward', 'richardson')
FIRST_LEVELS = 8
MIXED_LEVELS = 4
KINK_RATIO = 0.75
KINK_FLOOR = 256.0

PASS = 'pass'
MISMATCH = 'mismatch'
EXCLUDED = 'excluded'


# ==============================================================================
# STEP POLICY
# ==============================================================================

def _power_of_two(value: float) -> float:
    return 2.0 ** round(math.log2(value))


def first_step(coord: float) -> float:
    """max(|c|, 1) * eps^(1/3), rounded to a power of two."""
    return _power_of_two(max(abs(coord), 1.0) * EPS ** (1.0 / 3.0))


def mixed_step(coord: float) -> float:
    """Outer step of iterated mixed stencils: max(|c|, 1) * eps^(1/4)."""
    return _power_of_two(max(abs(coord), 1.0) * EPS ** 0.25)


def stencil_margin(rect: Rectangle) -> float:
    return 4.0 * mixed_step(max(abs(v) for v in rect.as_tuple()))


def _axis_index(axis: str) -> int:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return AXES.index(axis)


def _point(p) -> tuple:
    x, y = p
    return (float(x), float(y))


def _bounds(domain: Rectangle, ax: int) -> tuple:
    return (domain.a, domain.b) if ax == 0 else (domain.c, domain.d)


def _fitting_schemes(domain: Rectangle, p: tuple, ax: int, reach: float, preferred: str) -> list:
    lo, hi = _bounds(domain, ax)
    c = p[ax]
    reach_left = c - reach >= lo
    reach_right = c + reach <= hi
    fits = {
        'central': reach_left and reach_right,
        'richardson': reach_left and reach_right,
        'forward': reach_right,
        'backward': reach_left,
    }
    order = [preferred] + [s for s in ('forward', 'backward') if s != preferred]
    return [s for s in order if fits[s]]


# ==============================================================================
# ESTIMATES
# ==============================================================================

@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    step: float
    scheme: str
    error_indicator: float
    excluded: bool = False
    asymmetry: float = 0.0
    kinked: bool = False
    # eps * |f| / spacing of the final stencil: the quotient is only this precise
    rounding: float = 0.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step!r}")
        if not self.error_indicator >= 0:
            raise ValueError(f"error_indicator must be >= 0, got {self.error_indicator!r}")

    @classmethod
    def excluded_at(cls, step: float, scheme: str) -> 'DerivativeEstimate':
        return cls(value=math.nan, step=step, scheme=scheme, error_indicator=math.inf,
                   excluded=True, asymmetry=math.nan, rounding=math.nan)


class _Line:
    """f restricted to the axis line through p, memoised by coordinate."""

    def __init__(self, f: Function2D, p: tuple, ax: int):
        self.f = f
        self.p = p
        self.ax = ax
        self.origin = p[ax]
        self._memo = {}

    def __call__(self, t: float) -> float:
        if t not in self._memo:
            q = (t, self.p[1]) if self.ax == 0 else (self.p[0], t)
            try:
                self._memo[t] = self.f(*q)
            except EvalError as exc:
                self._memo[t] = exc
        value = self._memo[t]
        if isinstance(value, EvalError):
            raise value
        return value


def _bracket(c: float, h: float, scheme: str) -> tuple:
    if scheme == 'forward':
        return c, c + h
    if scheme == 'backward':
        return c - h, c
    return c - h, c + h


def _quotient(line, h: float, scheme: str) -> float:
    lo, hi = _bracket(line.origin, h, scheme)
    return (line(hi) - line(lo)) / (hi - lo)


def _rounding(line, h: float, scheme: str) -> float:
    lo, hi = _bracket(line.origin, h, scheme)
    return EPS * max(abs(line(lo)), abs(line(hi))) / (hi - lo)


def _refine(level_value, levels: int) -> tuple:
    """
    Halve until the difference between consecutive levels stops shrinking.
    Returns (level, value, difference to the previous level).
    """
    values = [level_value(0)]
    best, best_err = 0, math.inf
    for i in range(1, levels):
        try:
            values.append(level_value(i))
        except EvalError:
            break
        err = abs(values[i] - values[i - 1])
        if i >= 2 and err >= best_err:
            break
        best, best_err = i, err
    return best, values[best], best_err


def _asymmetry(line, h: float) -> tuple:
    c = line.origin
    lo, hi = c - h, c + h
    mid = line(c)
    left, right = line(lo), line(hi)
    gap = abs((right - mid) / (hi - c) - (mid - left) / (c - lo))
    floor = KINK_FLOOR * EPS * max(abs(left), abs(mid), abs(right), 1e-300) / h
    return gap, floor


def _kink(line, h0: float) -> tuple:
    """One-sided asymmetry at h0, and whether it persists at h0/2."""
    try:
        coarse, floor = _asymmetry(line, h0)
        fine, _ = _asymmetry(line, h0 / 2)
    except EvalError:
        return math.nan, False
    return coarse, bool(coarse > floor and fine > KINK_RATIO * coarse)


def partial(f: Function2D, axis: str, p, scheme: str = 'central',
            h0: Optional[float] = None, levels: int = FIRST_LEVELS) -> DerivativeEstimate:
    """
    Estimate d f / d axis at p.

    Refines from h0 by halving (at most `levels` levels). A failed
    evaluation switches to the forward, then backward, stencil; if every
    stencil fails the estimate is excluded.
    """
    ax = _axis_index(axis)
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    p = _point(p)
    if not f.domain.contains(*p):
        raise ValueError(f"point {p} lies outside {f.domain}")
    h0 = first_step(p[ax]) if h0 is None else float(h0)
    if not h0 > 0:
        raise ValueError(f"h0 must be positive, got {h0!r}")
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")

    candidates = _fitting_schemes(f.domain, p, ax, h0, scheme)
    if not candidates:
        raise ValueError(f"no difference stencil of step {h0} fits {f.domain} at {p}")

    line = _Line(f, p, ax)
    for candidate in candidates:
        if candidate == 'richardson':
            central = {}

            def central_at(i):
                if i not in central:
                    central[i] = _quotient(line, h0 / 2 ** i, 'central')
                return central[i]

            def level_value(i):
                return (4.0 * central_at(i + 1) - central_at(i)) / 3.0
        else:
            def level_value(i, candidate=candidate):
                return _quotient(line, h0 / 2 ** i, candidate)

        try:
            level, value, err = _refine(level_value, levels)
        except EvalError as exc:
            logger.debug(f"{candidate} stencil failed for d{axis} at {p}: {exc}")
            continue

        asymmetry, kinked = math.nan, False
        if candidate in ('central', 'richardson'):
            asymmetry, kinked = _kink(line, h0)
        indicator = max(err, asymmetry) if kinked else err
        if candidate == 'richardson':
            # (4 c(h/2) - c(h)) / 3 is about 1.5 times as noisy as c(h/2)
            rounding = 1.5 * _rounding(line, h0 / 2 ** (level + 1), 'central')
        else:
            rounding = _rounding(line, h0 / 2 ** level, candidate)
        if candidate != scheme:
            logger.debug(f"d{axis} at {p}: fell back from {scheme} to {candidate}")
        return DerivativeEstimate(
            value=value, step=h0 / 2 ** level, scheme=candidate,
            error_indicator=indicator, asymmetry=asymmetry, kinked=kinked, rounding=rounding,
        )

    logger.debug(f"d{axis} at {p} excluded: every stencil failed")
    return DerivativeEstimate.excluded_at(h0, scheme)


def mixed_iterated(f: Function2D, order: Sequence[str], p,
                   outer_step: Optional[float] = None,
                   inner_step: Optional[float] = None,
                   levels: Optional[int] = None) -> DerivativeEstimate:
    """
    Differentiate along order[0], then along order[1].

    order=('x', 'y') estimates d2 d1 f. The outer quotient is a central
    difference of inner Richardson partials, refined over MIXED_LEVELS steps.
    inner_step is the starting step of those inner partials; levels caps the
    halvings of both stencils.
    """
    first, second = tuple(order)
    inner_ax, outer_ax = _axis_index(first), _axis_index(second)
    if inner_ax == outer_ax:
        raise ValueError(f"mixed order needs two distinct axes, got {order!r}")
    p = _point(p)
    if not f.domain.contains(*p):
        raise ValueError(f"point {p} lies outside {f.domain}")
    k0 = mixed_step(p[outer_ax]) if outer_step is None else float(outer_step)
    if not k0 > 0:
        raise ValueError(f"outer step must be positive, got {k0!r}")
    if levels is not None and levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")

    inner = {}

    def inner_at(t):
        if t not in inner:
            q = (p[0], t) if outer_ax == 1 else (t, p[1])
            inner[t] = partial(f, first, q, scheme='richardson', h0=inner_step,
                               levels=FIRST_LEVELS if levels is None else levels)
        estimate = inner[t]
        if estimate.excluded:
            raise EvalError(f"inner d{first} excluded at {t}")
        return estimate

    c = p[outer_ax]
    for candidate in _fitting_schemes(f.domain, p, outer_ax, k0, 'central'):
        def bracket(i, candidate=candidate):
            return _bracket(c, k0 / 2 ** i, candidate)

        def level_value(i):
            lo, hi = bracket(i)
            return (inner_at(hi).value - inner_at(lo).value) / (hi - lo)

        try:
            level, value, err = _refine(level_value, MIXED_LEVELS if levels is None else levels)
        except EvalError as exc:
            logger.debug(f"{candidate} outer stencil failed for mixed {order} at {p}: {exc}")
            continue
        lo, hi = bracket(level)
        used = (inner[lo], inner[hi])
        inner_err = (used[0].error_indicator + used[1].error_indicator) / (hi - lo)
        rounding = (used[0].rounding + used[1].rounding
                    + EPS * max(abs(used[0].value), abs(used[1].value))) / (hi - lo)
        return DerivativeEstimate(
            value=value, step=k0 / 2 ** level, scheme=candidate,
            error_indicator=max(err, inner_err),
            kinked=any(e.kinked for e in used),
            rounding=rounding,
        )

    logger.debug(f"mixed {order} at {p} excluded")
    return DerivativeEstimate.excluded_at(k0, 'central')


def mixed_cross(f: Function2D, p, h: float, k: float) -> DerivativeEstimate:
    """
    The symmetric double difference over the box [x-h, x+h] x [y-k, y+k].

    Summation order makes mixed_cross(f, (x, y), h, k) and
    mixed_cross(f.transposed(), (y, x), k, h) bit-identical.
    """
    x, y = _point(p)
    h, k = float(h), float(k)
    if not (h > 0 and k > 0):
        raise ValueError(f"h and k must be positive, got {h!r}, {k!r}")

    def double_difference(h, k):
        xm, xp, ym, yp = x - h, x + h, y - k, y + k
        if not (f.domain.contains(xm, ym) and f.domain.contains(xp, yp)):
            raise ValueError(f"cross stencil ({h}, {k}) at {(x, y)} leaves {f.domain}")
        diagonal = f(xp, yp) + f(xm, ym)
        anti = f(xp, ym) + f(xm, yp)
        area = (xp - xm) * (yp - ym)
        return (diagonal - anti) / area, EPS * (abs(diagonal) + abs(anti)) / area

    try:
        value, rounding = double_difference(h, k)
    except EvalError as exc:
        logger.debug(f"cross difference at {(x, y)} excluded: {exc}")
        return DerivativeEstimate.excluded_at(h, 'central')
    try:
        indicator = abs(value - double_difference(h / 2, k / 2)[0])
    except EvalError:
        indicator = math.inf
    return DerivativeEstimate(value=value, step=h, scheme='central', error_indicator=indicator,
                              rounding=rounding)


# ==============================================================================
# SCHWARZ AUDIT
# ==============================================================================

class AuditNode(NamedTuple):
    x: float
    y: float
    d21: float
    d12: float
    delta: float
    status: str


@dataclass(frozen=True)
class SchwarzAuditReport:
    nx: int
    ny: int
    tol: float
    rect: Rectangle
    pass_fraction: float
    mismatch_fraction: float
    excluded_fraction: float
    mismatch_measure: float
    max_discrepancy: float
    argmax_point: Optional[tuple]
    row_mismatch: list
    column_mismatch: list
    nodes: list = field(repr=False)

    @property
    def counts(self) -> dict:
        counts = {PASS: 0, MISMATCH: 0, EXCLUDED: 0}
        for node in self.nodes:
            counts[node.status] += 1
        return counts


def audit_grid(rect: Rectangle, nx: int, ny: int) -> tuple:
    """Uniform nodes inside rect, kept one stencil margin off the edges."""
    m = stencil_margin(rect)
    if rect.width <= 2 * m or rect.height <= 2 * m:
        raise ValueError(f"{rect} is too small for the audit stencil")
    return np.linspace(rect.a + m, rect.b - m, nx), np.linspace(rect.c + m, rect.d - m, ny)


def _audit_node(f: Function2D, x: float, y: float, tol: float) -> AuditNode:
    d21 = mixed_iterated(f, ('x', 'y'), (x, y))
    d12 = mixed_iterated(f, ('y', 'x'), (x, y))
    if d21.excluded or d12.excluded:
        return AuditNode(x, y, d21.value, d12.value, math.nan, EXCLUDED)
    delta = abs(d21.value - d12.value)
    return AuditNode(x, y, d21.value, d12.value, delta, PASS if delta <= tol else MISMATCH)


def schwarz_audit(f: Function2D, rect: Optional[Rectangle] = None,
                  nx: int = 51, ny: int = 51, tol: float = 1e-5) -> SchwarzAuditReport:
    """Compare both mixed orders on an nx by ny grid; nodes are row-major (y outer)."""
    rect = f.domain if rect is None else rect
    if nx < 3 or ny < 3:
        raise ValueError(f"audit grid needs nx, ny >= 3, got {nx}x{ny}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    xs, ys = audit_grid(rect, nx, ny)
    points = [(float(x), float(y)) for y in ys for x in xs]
    nodes = pmap(lambda pt: _audit_node(f, pt[0], pt[1], tol), points)

    total = len(nodes)
    mismatched = sum(1 for n in nodes if n.status == MISMATCH)
    excluded = sum(1 for n in nodes if n.status == EXCLUDED)
    passed = total - mismatched - excluded

    max_discrepancy, argmax_point = math.nan, None
    for node in nodes:
        if node.status == EXCLUDED:
            continue
        # strict comparison keeps the first node in row-major order on ties
        if argmax_point is None or node.delta > max_discrepancy:
            max_discrepancy, argmax_point = node.delta, (node.x, node.y)

    status = np.array([n.status == MISMATCH for n in nodes]).reshape(ny, nx)
    report = SchwarzAuditReport(
        nx=nx, ny=ny, tol=tol, rect=rect,
        pass_fraction=passed / total,
        mismatch_fraction=mismatched / total,
        excluded_fraction=excluded / total,
        mismatch_measure=mismatched / (total - excluded) if total > excluded else math.nan,
        max_discrepancy=max_discrepancy,
        argmax_point=argmax_point,
        row_mismatch=[float(v) for v in status.mean(axis=1)],
        column_mismatch=[float(v) for v in status.mean(axis=0)],
        nodes=nodes,
    )
    logger.info(
        f"schwarz audit of {f.label} on {nx}x{ny}: {mismatched} mismatched, "
        f"{excluded} excluded, max |d21 - d12| = {max_discrepancy:.3e}"
    )
    return report


# ==============================================================================
# ORACLE GAPS
# ==============================================================================

@dataclass(frozen=True)
class OracleGapReport:
    points: int
    max_gap: dict
    worst_point: dict
    excluded: dict


def _oracle_estimators(f: Function2D) -> dict:
    estimators = {
        'd1': (f.oracle_d1, lambda p: partial(f, 'x', p, scheme='richardson')),
        'd2': (f.oracle_d2, lambda p: partial(f, 'y', p, scheme='richardson')),
        'd21': (f.oracle_d21, lambda p: mixed_iterated(f, ('x', 'y'), p)),
        'd12': (f.oracle_d12, lambda p: mixed_iterated(f, ('y', 'x'), p)),
    }
    return {name: pair for name, pair in estimators.items() if pair[0] is not None}


def oracle_gaps(f: Function2D, points) -> OracleGapReport:
    """Largest |estimate - oracle| per available oracle over the given points."""
    points = [_point(p) for p in points]
    estimators = _oracle_estimators(f)
    max_gap = {name: 0.0 for name in estimators}
    worst = {name: None for name in estimators}
    excluded = {name: 0 for name in estimators}
    for name, (oracle, estimate) in estimators.items():
        for p, est in zip(points, pmap(estimate, points)):
            if est.excluded:
                excluded[name] += 1
                continue
            gap = abs(est.value - oracle(*p))
            if worst[name] is None or gap > max_gap[name]:
                max_gap[name], worst[name] = gap, p
    return OracleGapReport(points=len(points), max_gap=max_gap, worst_point=worst, excluded=excluded)


# ==============================================================================
# CLASSICAL SUFFICIENT CONDITIONS
# ==============================================================================

RING_SIZE = 16
SHRINK_FACTOR = 5.0


@dataclass(frozen=True)
class ClassicalHypotheses:
    """
    Numeric readings of the classical conditions for d21 f = d12 f at p.

    schwarz: d1 f, d2 f and d21 f continuous at p.
    peano:   d1 f, d2 f exist near p and d21 f continuous at p.
    young:   d1 f and d2 f differentiable at p.
    """
    point: tuple
    radius: float
    tol: float
    schwarz: bool
    peano: bool
    young: bool
    continuity: dict
    differentiability: dict


def _ring(p: tuple, r: float) -> list:
    angles = 2 * np.pi * np.arange(RING_SIZE) / RING_SIZE
    return [(p[0] + r * float(np.cos(a)), p[1] + r * float(np.sin(a))) for a in angles]


def _shrinks(coarse: float, fine: float, tol: float) -> bool:
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        return False
    return fine <= tol or SHRINK_FACTOR * fine <= coarse


def classical_hypotheses(f: Function2D, p, radius: float = 1e-2,
                         tol: float = 1e-3) -> ClassicalHypotheses:
    p = _point(p)
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    margin = stencil_margin(f.domain)
    if not all(f.domain.contains(*q, margin=margin) for q in [p] + _ring(p, radius)):
        raise ValueError(f"rings of radius {radius} around {p} leave {f.domain}")

    quantities = {
        'd1': lambda q: partial(f, 'x', q, scheme='richardson'),
        'd2': lambda q: partial(f, 'y', q, scheme='richardson'),
        'd21': lambda q: mixed_iterated(f, ('x', 'y'), q),
    }
    rings = {r: _ring(p, r) for r in (radius, radius / 10)}

    def values(name, pts):
        return np.array([e.value if not e.excluded else np.nan
                         for e in pmap(quantities[name], pts)])

    continuity, differentiability = {}, {}
    for name in quantities:
        centre = values(name, [p])[0]
        osc, rem = [], []
        for r, pts in rings.items():
            v = values(name, pts)
            osc.append(float(np.max(np.abs(v - centre))))
            # axis slopes from the ring points at angles 0, pi/2, pi, 3pi/2
            q = RING_SIZE // 4
            a = (v[0] - v[2 * q]) / (pts[0][0] - pts[2 * q][0])
            b = (v[q] - v[3 * q]) / (pts[q][1] - pts[3 * q][1])
            model = centre + np.array([a * (x - p[0]) + b * (y - p[1]) for x, y in pts])
            rem.append(float(np.max(np.abs(v - model))) / r)
        continuity[name] = (osc[0], osc[1], _shrinks(osc[0], osc[1], tol))
        if name != 'd21':
            differentiability[name] = (rem[0], rem[1], _shrinks(rem[0], rem[1], tol))

    continuous = {name: entry[2] for name, entry in continuity.items()}
    differentiable = {name: entry[2] for name, entry in differentiability.items()}
    result = ClassicalHypotheses(
        point=p, radius=radius, tol=tol,
        schwarz=continuous['d1'] and continuous['d2'] and continuous['d21'],
        peano=continuous['d21'],
        young=differentiable['d1'] and differentiable['d2'],
        continuity=continuity,
        differentiability=differentiability,
    )
    logger.debug(f"classical hypotheses of {f.label} at {p}: {result}")
    return result
