"""
Bivariate test functions: the Rectangle/Function2D carriers, the built-in
corpus with analytic oracles, and the bridge from parsed expressions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional

import numpy as np
from scipy.special import zeta

from .exceptions import EvalError, UnknownBuiltin
from .expr import ExprAst, evaluate, evaluate_array, pretty_print

logger = logging.getLogger(__name__)

Scalar2D = Callable[[float, float], float]
Vector2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ==============================================================================
# CARRIERS
# ==============================================================================

@dataclass(frozen=True)
class Rectangle:
    """The open box (a,b) x (c,d)."""
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        bounds = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(v) for v in bounds):
            raise ValueError(f"rectangle bounds must be finite, got {bounds}")
        if not (self.a < self.b and self.c < self.d):
            raise ValueError(f"rectangle needs a<b and c<d, got {bounds}")

    @classmethod
    def from_string(cls, text: str) -> 'Rectangle':
        """Parse 'a,b,c,d'."""
        parts = [p for p in text.replace(' ', '').split(',') if p]
        if len(parts) != 4:
            raise ValueError(f"rectangle must be 'a,b,c,d', got {text!r}")
        return cls(*(float(p) for p in parts))

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def height(self) -> float:
        return self.d - self.c

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.a + margin <= x <= self.b - margin
                and self.c + margin <= y <= self.d - margin)

    def transposed(self) -> 'Rectangle':
        return Rectangle(self.c, self.d, self.a, self.b)

    def as_tuple(self) -> tuple:
        return (self.a, self.b, self.c, self.d)


def _swap(fn: Optional[Scalar2D]) -> Optional[Scalar2D]:
    if fn is None:
        return None
    return lambda x, y: fn(y, x)


@dataclass(frozen=True)
class Function2D:
    """
    A real function on a rectangle, optionally with analytic derivative oracles.

    oracle_d21 is the x-then-y mixed derivative, oracle_d12 the y-then-x one.
    Evaluation raises EvalError where the function has no real value.
    """
    evaluator: Scalar2D
    domain: Rectangle
    label: str = 'f'
    oracle_d1: Optional[Scalar2D] = None
    oracle_d2: Optional[Scalar2D] = None
    oracle_d21: Optional[Scalar2D] = None
    oracle_d12: Optional[Scalar2D] = None
    vector_evaluator: Optional[Vector2D] = field(default=None, compare=False)

    def __call__(self, x: float, y: float) -> float:
        try:
            value = float(self.evaluator(x, y))
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise EvalError(f"{self.label} undefined at ({x!r}, {y!r}): {exc}") from exc
        if not math.isfinite(value):
            raise EvalError(f"{self.label} is not finite at ({x!r}, {y!r})")
        return value

    def evaluate_grid(self, xs, ys) -> np.ndarray:
        """Evaluate on broadcast arrays; NaN where evaluation fails."""
        xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        if self.vector_evaluator is not None:
            with np.errstate(all='ignore'):
                values = np.asarray(self.vector_evaluator(xs, ys), dtype=float)
            values = np.broadcast_to(values, xs.shape)
            return np.where(np.isfinite(values), values, np.nan)
        out = np.empty(xs.shape)
        for index in np.ndindex(xs.shape):
            try:
                out[index] = self(float(xs[index]), float(ys[index]))
            except EvalError:
                out[index] = np.nan
        return out

    def transposed(self) -> 'Function2D':
        """f^T(x, y) = f(y, x), oracles swapped accordingly."""
        vector = self.vector_evaluator
        return Function2D(
            evaluator=_swap(self.evaluator),
            domain=self.domain.transposed(),
            label=f"{self.label}^T",
            oracle_d1=_swap(self.oracle_d2),
            oracle_d2=_swap(self.oracle_d1),
            oracle_d21=_swap(self.oracle_d12),
            oracle_d12=_swap(self.oracle_d21),
            vector_evaluator=(lambda x, y: vector(y, x)) if vector is not None else None,
        )

    def with_domain(self, domain: Rectangle) -> 'Function2D':
        return replace(self, domain=domain)

    @property
    def has_mixed_oracles(self) -> bool:
        return self.oracle_d21 is not None and self.oracle_d12 is not None


def from_expr(ast: ExprAst, domain: Rectangle) -> Function2D:
    """Wrap a parsed expression; no oracles are attached."""
    return Function2D(
        evaluator=partial(evaluate, ast),
        domain=domain,
        label=pretty_print(ast),
        vector_evaluator=partial(evaluate_array, ast),
    )


# ==============================================================================
# CORPUS REGISTRY
# ==============================================================================

class Corpus:
    """Name -> factory table, filled with the @corpus.register decorator."""

    def __init__(self):
        self._entries = {}

    def register(self, name: str, domain: tuple, summary: str = ''):
        def decorator(factory):
            self._entries[name] = (factory, Rectangle(*domain), summary or (factory.__doc__ or '').strip())
            return factory
        return decorator

    def names(self) -> list:
        return sorted(self._entries)

    def describe(self) -> list:
        return [
            {'name': name, 'domain': list(self._entries[name][1].as_tuple()),
             'summary': self._entries[name][2]}
            for name in self.names()
        ]

    def build(self, name: str) -> Function2D:
        try:
            factory, domain, _ = self._entries[name]
        except KeyError:
            raise UnknownBuiltin(name, self._entries) from None
        return factory(domain)


corpus = Corpus()


def builtin(name: str) -> Function2D:
    """Return the named corpus function with every available oracle attached."""
    return corpus.build(name)


# ---------------- SMOOTH MEMBERS ----------------

@corpus.register('smooth_poly', (-1, 1, -1, 1), 'x^3 y + x y^2')
def _smooth_poly(domain):
    return Function2D(
        evaluator=lambda x, y: x ** 3 * y + x * y ** 2,
        domain=domain,
        label='smooth_poly',
        oracle_d1=lambda x, y: 3 * x ** 2 * y + y ** 2,
        oracle_d2=lambda x, y: x ** 3 + 2 * x * y,
        oracle_d21=lambda x, y: 3 * x ** 2 + 2 * y,
        oracle_d12=lambda x, y: 3 * x ** 2 + 2 * y,
        vector_evaluator=lambda x, y: x ** 3 * y + x * y ** 2,
    )


@corpus.register('trig', (-1, 1, -1, 1), 'sin(x) cos(y)')
def _trig(domain):
    return Function2D(
        evaluator=lambda x, y: math.sin(x) * math.cos(y),
        domain=domain,
        label='trig',
        oracle_d1=lambda x, y: math.cos(x) * math.cos(y),
        oracle_d2=lambda x, y: -math.sin(x) * math.sin(y),
        oracle_d21=lambda x, y: -math.cos(x) * math.sin(y),
        oracle_d12=lambda x, y: -math.cos(x) * math.sin(y),
        vector_evaluator=lambda x, y: np.sin(x) * np.cos(y),
    )


@corpus.register('xy', (-1, 1, -1, 1), 'x y (bilinear)')
def _xy(domain):
    return Function2D(
        evaluator=lambda x, y: x * y,
        domain=domain,
        label='xy',
        oracle_d1=lambda x, y: y,
        oracle_d2=lambda x, y: x,
        oracle_d21=lambda x, y: 1.0,
        oracle_d12=lambda x, y: 1.0,
        vector_evaluator=lambda x, y: x * y,
    )


# ---------------- COUNTEREXAMPLES ----------------

def _peano(x, y):
    if x == 0 and y == 0:
        return 0.0
    return x * y * (x * x - y * y) / (x * x + y * y)


def _peano_vector(x, y):
    r2 = x * x + y * y
    safe = np.where(r2 == 0, 1.0, r2)
    return np.where(r2 == 0, 0.0, x * y * (x * x - y * y) / safe)


def _peano_d1(x, y):
    if x == 0 and y == 0:
        return 0.0
    r2 = x * x + y * y
    return y * (x ** 4 + 4 * x * x * y * y - y ** 4) / (r2 * r2)


def _peano_d2(x, y):
    if x == 0 and y == 0:
        return 0.0
    r2 = x * x + y * y
    return x * (x ** 4 - 4 * x * x * y * y - y ** 4) / (r2 * r2)


def _peano_mixed(at_origin):
    def mixed(x, y):
        # iterated limits at the origin: d1(0, y) = -y, d2(x, 0) = x
        if x == 0 and y == 0:
            return at_origin
        r2 = x * x + y * y
        return (x * x - y * y) * (x ** 4 + 10 * x * x * y * y + y ** 4) / r2 ** 3
    return mixed


@corpus.register('peano', (-1, 1, -1, 1), 'x y (x^2 - y^2) / (x^2 + y^2), f(0,0) = 0')
def _peano_function(domain):
    return Function2D(
        evaluator=_peano,
        domain=domain,
        label='peano',
        oracle_d1=_peano_d1,
        oracle_d2=_peano_d2,
        oracle_d21=_peano_mixed(-1.0),
        oracle_d12=_peano_mixed(1.0),
        vector_evaluator=_peano_vector,
    )


def _sign(v):
    return 0.0 if v == 0 else math.copysign(1.0, v)


@corpus.register('abs_mix', (-1, 1, -1, 1), 'x |y|')
def _abs_mix(domain):
    return Function2D(
        evaluator=lambda x, y: x * abs(y),
        domain=domain,
        label='abs_mix',
        oracle_d1=lambda x, y: abs(y),
        oracle_d2=lambda x, y: x * _sign(y),
        oracle_d21=lambda x, y: _sign(y),
        oracle_d12=lambda x, y: _sign(y),
        vector_evaluator=lambda x, y: x * np.abs(y),
    )


@corpus.register('xy_abs_y', (-1, 1, -1, 1), 'x y |y|: Lipschitz first partials, no d22 f on y = 0')
def _xy_abs_y(domain):
    return Function2D(
        evaluator=lambda x, y: x * y * abs(y),
        domain=domain,
        label='xy_abs_y',
        oracle_d1=lambda x, y: y * abs(y),
        oracle_d2=lambda x, y: 2.0 * x * abs(y),
        oracle_d21=lambda x, y: 2.0 * abs(y),
        oracle_d12=lambda x, y: 2.0 * abs(y),
        vector_evaluator=lambda x, y: x * y * np.abs(y),
    )


def _osc(x):
    return 0.0 if x == 0 else x * x * math.sin(1.0 / x)


def _osc_derivative(x):
    return 0.0 if x == 0 else 2 * x * math.sin(1.0 / x) - math.cos(1.0 / x)


def _osc_vector(x, y):
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 0.0, x * x * np.sin(1.0 / safe)) + 0.0 * y


@corpus.register('osc', (-1, 1, -1, 1), 'x^2 sin(1/x): differentiable, not strongly, at x = 0')
def _osc_function(domain):
    return Function2D(
        evaluator=lambda x, y: _osc(x),
        domain=domain,
        label='osc',
        oracle_d1=lambda x, y: _osc_derivative(x),
        oracle_d2=lambda x, y: 0.0,
        oracle_d21=lambda x, y: 0.0,
        oracle_d12=lambda x, y: 0.0,
        vector_evaluator=_osc_vector,
    )


# ---------------- ESSER-SHISHA PRIMITIVE ----------------
# q(t) = t s(t) with s = +1 on [1/(m+1), 1/m) for even m, -1 for odd m (t > 0),
# s odd, so q is even and |q(t)| <= |t|.  h(y) = integral of q from 0 to y.

def _block(t: float) -> int:
    """m >= 0 with t in [1/(m+1), 1/m), up to rounding at the block edges."""
    return max(math.ceil(1.0 / t) - 1, 0)


def esser_switch(t: float) -> float:
    if t == 0:
        return 0.0
    s = 1.0 if _block(abs(t)) % 2 == 0 else -1.0
    return s if t > 0 else -s


def esser_density(t: float) -> float:
    return t * esser_switch(t)


def _alternating_tail(n: int) -> float:
    """sum over m >= n of (-1)^m / m^2, through the Hurwitz zeta function."""
    sign = 1.0 if n % 2 == 0 else -1.0
    return sign * 0.25 * float(zeta(2.0, n / 2.0) - zeta(2.0, (n + 1) / 2.0))


def esser_primitive(y: float) -> float:
    """h(y) in closed form: whole blocks below |y| plus the partial block."""
    t = abs(y)
    if t < 1e-150:
        return 0.0
    m = _block(t)
    n = m + 1
    sign_n = 1.0 if n % 2 == 0 else -1.0
    # blocks [1/(k+1), 1/k) for k >= n contribute (-1)^k (1/k^2 - 1/(k+1)^2) / 2
    tail = _alternating_tail(n) - 0.5 * sign_n / (n * n)
    s_m = 1.0 if m % 2 == 0 else -1.0
    value = tail + s_m * (t * t - 1.0 / (n * n)) / 2.0
    return value if y > 0 else -value


@corpus.register('esser_shisha', (-1, 1, -1, 1), 'x h(y), h strongly differentiable at 0 only')
def _esser_shisha(domain):
    return Function2D(
        evaluator=lambda x, y: x * esser_primitive(y),
        domain=domain,
        label='esser_shisha',
        oracle_d1=lambda x, y: esser_primitive(y),
        oracle_d2=lambda x, y: x * esser_density(y),
        oracle_d21=lambda x, y: esser_density(y),
        oracle_d12=lambda x, y: esser_density(y),
    )


# ---------------- DENSITIES FOR THE DOUBLE-INTEGRAL CONSTRUCTION ----------------

@corpus.register('unit_density', (0, 1, 0, 1), 'h = 1')
def _unit_density(domain):
    return Function2D(
        evaluator=lambda x, y: 1.0,
        domain=domain,
        label='unit_density',
        vector_evaluator=lambda x, y: np.ones(np.broadcast(x, y).shape),
    )


@corpus.register('poly_density', (0, 1, 0, 1), 'h = u v')
def _poly_density(domain):
    return Function2D(
        evaluator=lambda x, y: x * y,
        domain=domain,
        label='poly_density',
        vector_evaluator=lambda x, y: x * y,
    )


@corpus.register('cos_density', (0, 1, 0, 1), 'h = cos(u + v)')
def _cos_density(domain):
    return Function2D(
        evaluator=lambda x, y: math.cos(x + y),
        domain=domain,
        label='cos_density',
        vector_evaluator=lambda x, y: np.cos(x + y),
    )


@corpus.register('step_density', (0, 1, 0, 1), 'h = 1 for u < 1/2, else 2')
def _step_density(domain):
    return Function2D(
        evaluator=lambda x, y: 1.0 if x < 0.5 else 2.0,
        domain=domain,
        label='step_density',
        vector_evaluator=lambda x, y: np.where(x < 0.5, 1.0, 2.0) + 0.0 * y,
    )
