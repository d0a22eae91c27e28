"""
Closed-form bivariate expressions: tokenizer, precedence parser, evaluator
and canonical printer.

The grammar (docs/grammar.md) only knows the variables x and y, the constant
pi and a fixed set of functions, so every parsed tree is total and auditable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .exceptions import EvalError, ParseError

__all__ = [
    'Const', 'Var', 'Unary', 'Binary', 'Compare', 'Logical', 'Conditional',
    'ExprAst', 'parse', 'evaluate', 'evaluate_array', 'pretty_print',
]

UNARY_FUNCS = ('abs', 'sin', 'cos', 'exp', 'log', 'sqrt', 'sign')
UNARY_OPS = ('neg',) + UNARY_FUNCS
BINARY_FUNCS = ('min', 'max')
BINARY_OPS = ('add', 'sub', 'mul', 'div', 'pow') + BINARY_FUNCS
COMPARE_OPS = {'<': 'lt', '<=': 'le', '>': 'gt', '>=': 'ge', '==': 'eq'}
KEYWORDS = ('if', 'then', 'else', 'and', 'or')
VARIABLES = ('x', 'y')


# ==============================================================================
# TREE
# ==============================================================================

@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        # Negative literals are Unary('neg', ...) so printing round-trips.
        if not math.isfinite(self.value) or math.copysign(1.0, self.value) < 0:
            raise ValueError(f"constant must be finite and non-negative, got {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLES:
            raise ValueError(f"unknown variable {self.name!r}")


@dataclass(frozen=True)
class Unary:
    op: str
    operand: 'Node'


@dataclass(frozen=True)
class Binary:
    op: str
    left: 'Node'
    right: 'Node'


@dataclass(frozen=True)
class Compare:
    op: str
    left: 'Node'
    right: 'Node'


@dataclass(frozen=True)
class Logical:
    op: str
    left: 'Node'
    right: 'Node'


@dataclass(frozen=True)
class Conditional:
    condition: 'Node'
    then: 'Node'
    otherwise: 'Node'


Node = Union[Const, Var, Unary, Binary, Compare, Logical, Conditional]


def is_boolean(node: Node) -> bool:
    return isinstance(node, (Compare, Logical))


@dataclass(frozen=True)
class ExprAst:
    """A parsed expression; immutable, so safe to share between threads."""
    root: Node

    def __str__(self):
        return pretty_print(self)


# ==============================================================================
# TOKENIZER
# ==============================================================================

class Token(NamedTuple):
    kind: str      # 'number', 'name', 'op', 'eof'
    text: str
    pos: int       # byte offset into the source


TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|[-+*/^(),<>])
''', re.VERBOSE)


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode('utf-8'))


def tokenize(source: str) -> list[Token]:
    tokens = []
    index = 0
    while index < len(source):
        match = TOKEN_RE.match(source, index)
        if match is None:
            raise ParseError(_byte_offset(source, index),
                             f"unexpected character {source[index]!r}")
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append(Token(kind, match.group(), _byte_offset(source, index)))
        index = match.end()
    tokens.append(Token('eof', '', _byte_offset(source, len(source))))
    return tokens


# ==============================================================================
# PARSER (recursive descent, one function per precedence level)
# ==============================================================================

class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.index = 0

    # --- token stream ---
    def peek(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != 'eof':
            self.index += 1
        return token

    def at(self, text: str) -> bool:
        token = self.peek()
        return token.kind in ('op', 'name') and token.text == text

    def expect(self, text: str) -> Token:
        token = self.peek()
        if not self.at(text):
            found = 'end of input' if token.kind == 'eof' else repr(token.text)
            raise ParseError(token.pos, f"expected '{text}', found {found}")
        return self.advance()

    # --- sort checks ---
    @staticmethod
    def real(node: Node, pos: int) -> Node:
        if is_boolean(node):
            raise ParseError(pos, "comparison used where a number is expected")
        return node

    @staticmethod
    def boolean(node: Node, pos: int) -> Node:
        if not is_boolean(node):
            raise ParseError(pos, "number used where a condition is expected")
        return node

    # --- grammar ---
    def parse(self) -> ExprAst:
        start = self.peek().pos
        root = self.real(self.expression(), start)
        token = self.peek()
        if token.kind != 'eof':
            raise ParseError(token.pos, f"unexpected {token.text!r}")
        return ExprAst(root)

    def expression(self) -> Node:
        if self.at('if'):
            self.advance()
            pos = self.peek().pos
            condition = self.boolean(self.logic(), pos)
            self.expect('then')
            pos = self.peek().pos
            then = self.real(self.expression(), pos)
            self.expect('else')
            pos = self.peek().pos
            otherwise = self.real(self.expression(), pos)
            return Conditional(condition, then, otherwise)
        return self.logic()

    def logic(self) -> Node:
        pos = self.peek().pos
        left = self.conjunction()
        while self.at('or'):
            self.boolean(left, pos)
            self.advance()
            rpos = self.peek().pos
            left = Logical('or', left, self.boolean(self.conjunction(), rpos))
        return left

    def conjunction(self) -> Node:
        pos = self.peek().pos
        left = self.comparison()
        while self.at('and'):
            self.boolean(left, pos)
            self.advance()
            rpos = self.peek().pos
            left = Logical('and', left, self.boolean(self.comparison(), rpos))
        return left

    def comparison(self) -> Node:
        pos = self.peek().pos
        left = self.additive()
        token = self.peek()
        if token.kind == 'op' and token.text in COMPARE_OPS:
            self.real(left, pos)
            self.advance()
            rpos = self.peek().pos
            right = self.real(self.additive(), rpos)
            after = self.peek()
            if after.kind == 'op' and after.text in COMPARE_OPS:
                raise ParseError(after.pos, "comparisons do not chain")
            return Compare(COMPARE_OPS[token.text], left, right)
        return left

    def additive(self) -> Node:
        pos = self.peek().pos
        left = self.term()
        while self.at('+') or self.at('-'):
            op = 'add' if self.advance().text == '+' else 'sub'
            self.real(left, pos)
            rpos = self.peek().pos
            left = Binary(op, left, self.real(self.term(), rpos))
        return left

    def term(self) -> Node:
        pos = self.peek().pos
        left = self.unary()
        while self.at('*') or self.at('/'):
            op = 'mul' if self.advance().text == '*' else 'div'
            self.real(left, pos)
            rpos = self.peek().pos
            left = Binary(op, left, self.real(self.unary(), rpos))
        return left

    def unary(self) -> Node:
        if self.at('-'):
            self.advance()
            pos = self.peek().pos
            return Unary('neg', self.real(self.unary(), pos))
        return self.power()

    def power(self) -> Node:
        pos = self.peek().pos
        base = self.atom()
        if self.at('^'):
            self.real(base, pos)
            self.advance()
            rpos = self.peek().pos
            return Binary('pow', base, self.real(self.unary(), rpos))
        return base

    def atom(self) -> Node:
        token = self.peek()
        if token.kind == 'number':
            self.advance()
            return Const(float(token.text))
        if token.kind == 'name':
            name = token.text
            if name in VARIABLES:
                self.advance()
                return Var(name)
            if name == 'pi':
                self.advance()
                return Const(math.pi)
            if name in UNARY_FUNCS:
                self.advance()
                self.expect('(')
                pos = self.peek().pos
                operand = self.real(self.expression(), pos)
                self.expect(')')
                return Unary(name, operand)
            if name in BINARY_FUNCS:
                self.advance()
                self.expect('(')
                pos = self.peek().pos
                left = self.real(self.expression(), pos)
                self.expect(',')
                pos = self.peek().pos
                right = self.real(self.expression(), pos)
                self.expect(')')
                return Binary(name, left, right)
            if name in KEYWORDS:
                raise ParseError(token.pos, f"unexpected keyword '{name}'")
            raise ParseError(token.pos, f"unknown identifier '{name}'")
        if self.at('('):
            self.advance()
            inner = self.expression()
            self.expect(')')
            return inner
        if token.kind == 'eof':
            raise ParseError(token.pos, "unexpected end of input")
        raise ParseError(token.pos, f"unexpected {token.text!r}")


def parse(source: str) -> ExprAst:
    """Parse `source` into an ExprAst; raises ParseError at the first offending byte."""
    return _Parser(source).parse()


# ==============================================================================
# SCALAR EVALUATION
# ==============================================================================

def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise EvalError(f"{what} produced a non-finite value")
    return value


def _unary(op: str, v: float) -> float:
    if op == 'neg':
        return -v
    if op == 'abs':
        return abs(v)
    if op == 'sign':
        return 0.0 if v == 0 else math.copysign(1.0, v)
    if op == 'sin':
        return math.sin(v)
    if op == 'cos':
        return math.cos(v)
    if op == 'exp':
        try:
            return _finite(math.exp(v), 'exp')
        except OverflowError:
            raise EvalError("exp overflow")
    if op == 'log':
        if v <= 0:
            raise EvalError("log of non-positive value")
        return math.log(v)
    if op == 'sqrt':
        if v < 0:
            raise EvalError("sqrt of negative value")
        return math.sqrt(v)
    raise ValueError(f"unknown unary op {op!r}")


def _binary(op: str, a: float, b: float) -> float:
    if op == 'add':
        return _finite(a + b, 'addition')
    if op == 'sub':
        return _finite(a - b, 'subtraction')
    if op == 'mul':
        return _finite(a * b, 'multiplication')
    if op == 'div':
        if b == 0:
            raise EvalError("division by zero")
        return _finite(a / b, 'division')
    if op == 'pow':
        try:
            return _finite(math.pow(a, b), 'pow')
        except (ValueError, OverflowError, ZeroDivisionError):
            raise EvalError("pow has no real value")
    if op == 'min':
        return min(a, b)
    if op == 'max':
        return max(a, b)
    raise ValueError(f"unknown binary op {op!r}")


def _compare(op: str, a: float, b: float) -> bool:
    if op == 'lt':
        return a < b
    if op == 'le':
        return a <= b
    if op == 'gt':
        return a > b
    if op == 'ge':
        return a >= b
    return a == b   # exact IEEE equality, meant for guards such as x == 0


def _eval(node: Node, x: float, y: float):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x if node.name == 'x' else y
    if isinstance(node, Unary):
        return _unary(node.op, _eval(node.operand, x, y))
    if isinstance(node, Binary):
        return _binary(node.op, _eval(node.left, x, y), _eval(node.right, x, y))
    if isinstance(node, Compare):
        return _compare(node.op, _eval(node.left, x, y), _eval(node.right, x, y))
    if isinstance(node, Logical):
        left = _eval(node.left, x, y)
        # short-circuit: the right operand is not evaluated when decided
        if node.op == 'and':
            return left and _eval(node.right, x, y)
        return left or _eval(node.right, x, y)
    if isinstance(node, Conditional):
        if _eval(node.condition, x, y):
            return _eval(node.then, x, y)
        return _eval(node.otherwise, x, y)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(ast: ExprAst, x: float, y: float) -> float:
    """Evaluate at (x, y) in double precision; raises EvalError where undefined."""
    return float(_eval(ast.root, float(x), float(y)))


# ==============================================================================
# VECTORISED EVALUATION (NaN marks points where evaluate would raise)
# ==============================================================================
# Conditions are carried as float arrays: 1.0 true, 0.0 false, NaN undefined.

def _clean(values):
    values = np.asarray(values, dtype=float)
    return np.where(np.isfinite(values), values, np.nan)


def _eval_array(node: Node, x, y):
    if isinstance(node, Const):
        return np.full(np.broadcast(x, y).shape, node.value)
    if isinstance(node, Var):
        return np.broadcast_to(x if node.name == 'x' else y, np.broadcast(x, y).shape).astype(float)
    if isinstance(node, Unary):
        v = _eval_array(node.operand, x, y)
        op = node.op
        if op == 'neg':
            return -v
        if op == 'abs':
            return np.abs(v)
        if op == 'sign':
            return np.sign(v)
        if op == 'log':
            return _clean(np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), np.nan))
        if op == 'sqrt':
            return _clean(np.where(v >= 0, np.sqrt(np.where(v >= 0, v, 0.0)), np.nan))
        return _clean(getattr(np, op)(v))
    if isinstance(node, Binary):
        a = _eval_array(node.left, x, y)
        b = _eval_array(node.right, x, y)
        op = node.op
        if op == 'add':
            return _clean(a + b)
        if op == 'sub':
            return _clean(a - b)
        if op == 'mul':
            return _clean(a * b)
        if op == 'div':
            return _clean(np.where(b != 0, a / np.where(b != 0, b, 1.0), np.nan))
        if op == 'pow':
            return _clean(np.power(a, b))
        if op == 'min':
            return np.minimum(a, b)
        return np.maximum(a, b)
    if isinstance(node, Compare):
        a = _eval_array(node.left, x, y)
        b = _eval_array(node.right, x, y)
        ops = {'lt': np.less, 'le': np.less_equal, 'gt': np.greater,
               'ge': np.greater_equal, 'eq': np.equal}
        truth = ops[node.op](a, b).astype(float)
        return np.where(np.isnan(a) | np.isnan(b), np.nan, truth)
    if isinstance(node, Logical):
        a = _eval_array(node.left, x, y)
        b = _eval_array(node.right, x, y)
        if node.op == 'and':
            return np.where(a == 0, 0.0, np.where(a == 1, b, np.nan))
        return np.where(a == 1, 1.0, np.where(a == 0, b, np.nan))
    if isinstance(node, Conditional):
        c = _eval_array(node.condition, x, y)
        then = _eval_array(node.then, x, y)
        otherwise = _eval_array(node.otherwise, x, y)
        return np.where(c == 1, then, np.where(c == 0, otherwise, np.nan))
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_array(ast: ExprAst, x, y) -> np.ndarray:
    """Broadcasting evaluation over numpy arrays; undefined points are NaN."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(all='ignore'):
        return np.asarray(_eval_array(ast.root, x, y), dtype=float)


# ==============================================================================
# PRINTER
# ==============================================================================

SYMBOLS = {'add': '+', 'sub': '-', 'mul': '*', 'div': '/', 'pow': '^',
           'lt': '<', 'le': '<=', 'gt': '>', 'ge': '>=', 'eq': '=='}
ATOM = 8


def _precedence(node: Node) -> int:
    if isinstance(node, Conditional):
        return 0
    if isinstance(node, Logical):
        return 1 if node.op == 'or' else 2
    if isinstance(node, Compare):
        return 3
    if isinstance(node, Binary):
        return {'add': 4, 'sub': 4, 'mul': 5, 'div': 5, 'pow': 7}.get(node.op, ATOM)
    if isinstance(node, Unary) and node.op == 'neg':
        return 6
    return ATOM


def _show(node: Node, min_prec: int) -> str:
    text = _render(node)
    return f"({text})" if _precedence(node) < min_prec else text


def _render(node: Node) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == 'neg':
            return '-' + _show(node.operand, 6)
        return f"{node.op}({_show(node.operand, 0)})"
    if isinstance(node, Binary):
        if node.op in BINARY_FUNCS:
            return f"{node.op}({_show(node.left, 0)}, {_show(node.right, 0)})"
        if node.op == 'pow':
            return f"{_show(node.left, ATOM)} ^ {_show(node.right, 6)}"
        level = _precedence(node)
        return f"{_show(node.left, level)} {SYMBOLS[node.op]} {_show(node.right, level + 1)}"
    if isinstance(node, Compare):
        return f"{_show(node.left, 4)} {SYMBOLS[node.op]} {_show(node.right, 4)}"
    if isinstance(node, Logical):
        level = _precedence(node)
        return f"{_show(node.left, level)} {node.op} {_show(node.right, level + 1)}"
    if isinstance(node, Conditional):
        return (f"if {_show(node.condition, 1)} then {_show(node.then, 0)} "
                f"else {_show(node.otherwise, 0)}")
    raise TypeError(f"not an expression node: {node!r}")


def pretty_print(ast: ExprAst) -> str:
    """Canonical minimal-parenthesis text; parse(pretty_print(a)) == a."""
    return _render(ast.root)
