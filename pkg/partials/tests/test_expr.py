import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from partials.exceptions import EvalError, ParseError
from partials.expr import (
    Binary, Compare, Conditional, Const, ExprAst, Logical, Unary, Var,
    evaluate, evaluate_array, parse, pretty_print,
)

# ---------------- AST STRATEGIES ----------------

constants = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(
    lambda v: Const(abs(v)))
leaves = st.one_of(constants, st.sampled_from([Var('x'), Var('y')]))


def _extend(real):
    comparisons = st.builds(Compare, st.sampled_from(['lt', 'le', 'gt', 'ge', 'eq']), real, real)
    conditions = st.recursive(
        comparisons,
        lambda inner: st.builds(Logical, st.sampled_from(['and', 'or']), inner, inner),
        max_leaves=3,
    )
    return st.one_of(
        st.builds(Unary, st.sampled_from(['neg', 'abs', 'sin', 'cos', 'exp', 'log', 'sqrt', 'sign']), real),
        st.builds(Binary, st.sampled_from(['add', 'sub', 'mul', 'div', 'pow', 'min', 'max']), real, real),
        st.builds(Conditional, conditions, real, real),
    )


expressions = st.recursive(leaves, _extend, max_leaves=12).map(ExprAst)


class ParseTestCase(SimpleTestCase):

    def test_precedence_and_associativity(self):
        """Test that ^ binds tighter than unary minus and is right associative"""
        self.assertEqual(parse('-x^2').root, Unary('neg', Binary('pow', Var('x'), Const(2.0))))
        self.assertEqual(parse('2^-x').root, Binary('pow', Const(2.0), Unary('neg', Var('x'))))
        self.assertEqual(
            parse('x^y^2').root,
            Binary('pow', Var('x'), Binary('pow', Var('y'), Const(2.0))),
        )
        self.assertEqual(
            parse('x - y - 1').root,
            Binary('sub', Binary('sub', Var('x'), Var('y')), Const(1.0)),
        )

    def test_guarded_singularity(self):
        """Test the and-guarded peano expression parses into a conditional"""
        ast = parse('if x == 0 and y == 0 then 0 else x*y*(x^2-y^2)/(x^2+y^2)')
        self.assertIsInstance(ast.root, Conditional)
        self.assertIsInstance(ast.root.condition, Logical)
        self.assertEqual(evaluate(ast, 0.0, 0.0), 0.0)
        self.assertAlmostEqual(evaluate(ast, 1.0, 2.0), 1 * 2 * (1 - 4) / 5, places=15)

    def test_pi_and_functions(self):
        """Test constants and the function table"""
        self.assertEqual(evaluate(parse('pi'), 0, 0), math.pi)
        self.assertEqual(evaluate(parse('max(x, y) - min(x, y)'), 2.0, 5.0), 3.0)
        self.assertEqual(evaluate(parse('sign(x)'), 0.0, 0.0), 0.0)
        self.assertEqual(evaluate(parse('abs(-3)'), 0, 0), 3.0)

    def test_error_positions_are_byte_offsets(self):
        """Test that ParseError reports the offending byte"""
        with self.assertRaises(ParseError) as ctx:
            parse('x + * y')
        self.assertEqual(ctx.exception.position, 4)

        with self.assertRaises(ParseError) as ctx:
            parse('x*+y')
        self.assertEqual(ctx.exception.position, 2)

        # a no-break space is whitespace but two bytes long
        with self.assertRaises(ParseError) as ctx:
            parse('\u00a0x $')
        self.assertEqual(ctx.exception.position, 4)

        with self.assertRaises(ParseError) as ctx:
            parse('(x + y')
        self.assertEqual(ctx.exception.position, 6)

    def test_rejects_bad_input(self):
        """Test unknown names, sort errors and chained comparisons"""
        for source in ('z + 1', 'x < y', 'if x then 1 else 2', '(x < y) + 1',
                       'x < y < 1', 'sin x', '', 'x y', 'then'):
            with self.subTest(source=source):
                with self.assertRaises(ParseError):
                    parse(source)


class EvaluateTestCase(SimpleTestCase):

    def test_arithmetic(self):
        self.assertEqual(evaluate(parse('x*y'), 2.0, 3.0), 6.0)
        self.assertEqual(evaluate(parse('x^3*y + x*y^2'), 1.0, 1.0), 2.0)

    def test_eval_errors(self):
        """Test that undefined points raise EvalError"""
        for source, x, y in (('1/x', 0.0, 1.0), ('log(x)', 0.0, 0.0), ('log(x)', -1.0, 0.0),
                             ('sqrt(x)', -1.0, 0.0), ('x^0.5', -2.0, 0.0), ('exp(x)', 1e6, 0.0)):
            with self.subTest(source=source, x=x):
                with self.assertRaises(EvalError):
                    evaluate(parse(source), x, y)

    def test_short_circuit(self):
        """Test that untaken branches are never evaluated"""
        self.assertEqual(evaluate(parse('if x == 0 then 1 else 1/x'), 0.0, 0.0), 1.0)
        self.assertEqual(evaluate(parse('if x == 0 or 1/x > 0 then 1 else 2'), 0.0, 0.0), 1.0)
        self.assertEqual(evaluate(parse('if x > 0 and log(x) < 0 then 1 else 2'), -1.0, 0.0), 2.0)

    def test_array_evaluation_matches_scalar(self):
        """Test evaluate_array against evaluate, NaN where scalar evaluation fails"""
        ast = parse('if x == 0 then 0 else log(abs(x)) * y + sqrt(y)')
        xs = np.array([-2.0, -0.5, 0.0, 0.5, 3.0])
        ys = np.array([1.0, -1.0, 2.0, 0.0, 4.0])
        values = evaluate_array(ast, xs, ys)
        for x, y, v in zip(xs, ys, values):
            try:
                expected = evaluate(ast, float(x), float(y))
            except EvalError:
                self.assertTrue(np.isnan(v))
            else:
                self.assertAlmostEqual(v, expected, places=12)


class PrettyPrintTestCase(SimpleTestCase):

    def test_canonical_text(self):
        self.assertEqual(pretty_print(parse('x*y*(x^2-y^2)/(x^2+y^2)')),
                         'x * y * (x ^ 2.0 - y ^ 2.0) / (x ^ 2.0 + y ^ 2.0)')
        self.assertEqual(pretty_print(parse('(-x)^2')), '(-x) ^ 2.0')
        self.assertEqual(pretty_print(parse('x - (y - 1)')), 'x - (y - 1.0)')

    def test_constants_are_non_negative(self):
        for value in (-0.0, -1.0, math.inf, math.nan):
            with self.subTest(value=value):
                with self.assertRaises(ValueError):
                    Const(value)
        self.assertEqual(parse(pretty_print(ExprAst(Const(0.0)))), ExprAst(Const(0.0)))
        self.assertEqual(pretty_print(parse('-0')), '-0.0')

    @settings(max_examples=1000, deadline=None)
    @given(expressions)
    def test_round_trip(self, ast):
        """Test parse(pretty_print(a)) == a on generated trees"""
        self.assertEqual(parse(pretty_print(ast)), ast)
