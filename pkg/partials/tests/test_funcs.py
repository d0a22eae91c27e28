import math

import numpy as np
from django.test import SimpleTestCase

from partials.exceptions import EvalError, UnknownBuiltin
from partials.expr import parse
from partials.funcs import (
    Function2D, Rectangle, builtin, corpus, esser_density, esser_primitive, from_expr,
)

SAMPLE_POINTS = [(0.3, -0.7), (0.5, 0.25), (-0.6, 0.45), (0.8, 0.9)]


class RectangleTestCase(SimpleTestCase):

    def test_from_string(self):
        rect = Rectangle.from_string(' 0, 1, -2, 2 ')
        self.assertEqual(rect.as_tuple(), (0.0, 1.0, -2.0, 2.0))
        self.assertEqual(rect.width, 1.0)
        self.assertEqual(rect.height, 4.0)
        self.assertEqual(rect.transposed().as_tuple(), (-2.0, 2.0, 0.0, 1.0))

    def test_rejects_degenerate_boxes(self):
        for text in ('1,0,0,1', '0,1,1,1', '0,1,0', '0,inf,0,1', '0,1,nan,1'):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    Rectangle.from_string(text)

    def test_contains_with_margin(self):
        rect = Rectangle(0, 1, 0, 1)
        self.assertTrue(rect.contains(0.0, 1.0))
        self.assertFalse(rect.contains(0.0, 1.0, margin=0.01))
        self.assertTrue(rect.contains(0.5, 0.5, margin=0.25))


class Function2DTestCase(SimpleTestCase):

    def test_evaluation_errors_are_wrapped(self):
        """Test that arithmetic failures and non-finite values raise EvalError"""
        rect = Rectangle(-1, 1, -1, 1)
        with self.assertRaises(EvalError):
            Function2D(lambda x, y: 1 / x, rect)(0.0, 0.5)
        with self.assertRaises(EvalError):
            Function2D(lambda x, y: math.inf, rect)(0.0, 0.0)
        with self.assertRaises(EvalError):
            from_expr(parse('log(x)'), rect)(0.0, 0.0)

    def test_evaluate_grid_marks_failures_with_nan(self):
        f = from_expr(parse('1/x + y'), Rectangle(-1, 1, -1, 1))
        values = f.evaluate_grid(np.array([-0.5, 0.0, 0.5]), 1.0)
        self.assertEqual(values[0], -1.0)
        self.assertTrue(np.isnan(values[1]))
        self.assertEqual(values[2], 3.0)

        # the scalar path gives the same answer when no vector evaluator exists
        scalar = Function2D(f.evaluator, f.domain)
        np.testing.assert_array_equal(
            scalar.evaluate_grid(np.array([-0.5, 0.0, 0.5]), 1.0), values)

    def test_from_expr_label_is_canonical_text(self):
        f = from_expr(parse('x*y'), Rectangle(-1, 1, -1, 1))
        self.assertEqual(f.label, 'x * y')
        self.assertFalse(f.has_mixed_oracles)
        self.assertEqual(f(2.0, 3.0), 6.0)

    def test_transposed_swaps_arguments_and_oracles(self):
        """Test f^T(x, y) = f(y, x) with d21 and d12 exchanged"""
        f = builtin('peano')
        t = f.transposed()
        for x, y in SAMPLE_POINTS:
            self.assertEqual(t(x, y), f(y, x))
            self.assertEqual(t.oracle_d1(x, y), f.oracle_d2(y, x))
            self.assertEqual(t.oracle_d21(x, y), f.oracle_d12(y, x))
        self.assertEqual(t.oracle_d21(0.0, 0.0), 1.0)
        self.assertEqual(t.oracle_d12(0.0, 0.0), -1.0)
        self.assertEqual(t.domain, f.domain.transposed())

    def test_with_domain(self):
        f = builtin('xy').with_domain(Rectangle(0, 2, 0, 2))
        self.assertEqual(f.domain.as_tuple(), (0.0, 2.0, 0.0, 2.0))
        self.assertEqual(f(2.0, 2.0), 4.0)


class CorpusTestCase(SimpleTestCase):

    def test_names_and_descriptions(self):
        names = corpus.names()
        for name in ('smooth_poly', 'trig', 'xy', 'peano', 'abs_mix', 'xy_abs_y', 'osc',
                     'esser_shisha', 'unit_density', 'poly_density', 'cos_density', 'step_density'):
            self.assertIn(name, names)
        described = {entry['name']: entry for entry in corpus.describe()}
        self.assertEqual(described['peano']['domain'], [-1.0, 1.0, -1.0, 1.0])
        self.assertEqual(described['cos_density']['domain'], [0.0, 1.0, 0.0, 1.0])

    def test_unknown_builtin(self):
        with self.assertRaises(UnknownBuiltin) as ctx:
            builtin('no_such_function')
        self.assertEqual(ctx.exception.name, 'no_such_function')
        self.assertIn('peano', str(ctx.exception))

    def test_peano_values(self):
        """Test the guarded origin and the iterated limits behind the mixed oracles"""
        f = builtin('peano')
        self.assertEqual(f(0.0, 0.0), 0.0)
        self.assertEqual(f.oracle_d21(0.0, 0.0), -1.0)
        self.assertEqual(f.oracle_d12(0.0, 0.0), 1.0)
        for t in (0.5, -0.25, 1e-3):
            self.assertAlmostEqual(f.oracle_d1(0.0, t), -t, places=15)
            self.assertAlmostEqual(f.oracle_d2(t, 0.0), t, places=15)

    def test_peano_is_antisymmetric(self):
        f = builtin('peano')
        rng = np.random.default_rng(11)
        for x, y in rng.uniform(-1.0, 1.0, size=(100, 2)):
            self.assertEqual(f(x, y), -f(y, x))
        self.assertEqual(f(0.5, 0.5), 0.0)

    def test_guarded_expression_matches_peano(self):
        """Test the parsed Peano function against the built-in on a 21x21 grid with the origin"""
        text = 'if x == 0 and y == 0 then 0 else x*y*(x*x - y*y)/(x*x + y*y)'
        parsed = from_expr(parse(text), Rectangle(-1, 1, -1, 1))
        f = builtin('peano')
        for x in np.linspace(-1.0, 1.0, 21):
            for y in np.linspace(-1.0, 1.0, 21):
                self.assertAlmostEqual(parsed(x, y), f(x, y), delta=1e-15)
        self.assertEqual(parsed(0.0, 0.0), 0.0)

    def test_first_oracles_match_difference_quotients(self):
        e = 1e-5
        for name in ('smooth_poly', 'trig', 'xy', 'peano', 'xy_abs_y'):
            f = builtin(name)
            for x, y in SAMPLE_POINTS:
                with self.subTest(name=name, point=(x, y)):
                    d1 = (f(x + e, y) - f(x - e, y)) / (2 * e)
                    d2 = (f(x, y + e) - f(x, y - e)) / (2 * e)
                    self.assertAlmostEqual(d1, f.oracle_d1(x, y), delta=1e-6)
                    self.assertAlmostEqual(d2, f.oracle_d2(x, y), delta=1e-6)

    def test_mixed_oracles_match_cross_differences(self):
        e = 1e-4
        for name in ('smooth_poly', 'trig', 'xy', 'peano', 'abs_mix', 'xy_abs_y'):
            f = builtin(name)
            for x, y in SAMPLE_POINTS:
                with self.subTest(name=name, point=(x, y)):
                    cross = (f(x + e, y + e) - f(x + e, y - e)
                             - f(x - e, y + e) + f(x - e, y - e)) / (4 * e * e)
                    self.assertAlmostEqual(cross, f.oracle_d21(x, y), delta=1e-5)
                    self.assertAlmostEqual(cross, f.oracle_d12(x, y), delta=1e-5)

    def test_vector_evaluators_agree_with_scalar(self):
        xs = np.array([-0.75, -0.5, 0.0, 0.25, 0.5])
        ys = np.array([0.5, 0.0, 0.0, -0.25, 0.75])
        for name in corpus.names():
            f = builtin(name)
            if f.vector_evaluator is None:
                continue
            with self.subTest(name=name):
                expected = [f(float(x), float(y)) for x, y in zip(xs, ys)]
                np.testing.assert_allclose(f.evaluate_grid(xs, ys), expected, rtol=1e-14, atol=1e-300)


class EsserShishaTestCase(SimpleTestCase):

    def test_density_switches_sign_per_block(self):
        self.assertEqual(esser_density(0.4), 0.4)
        self.assertEqual(esser_density(0.6), -0.6)
        self.assertEqual(esser_density(-0.4), 0.4)
        self.assertEqual(esser_density(0.0), 0.0)

    def test_primitive_block_integrals(self):
        """Test h(1/2) - h(1/3) = 5/72 and h(1) - h(1/2) = -3/8"""
        self.assertAlmostEqual(esser_primitive(0.5) - esser_primitive(1 / 3), 5 / 72, delta=1e-12)
        self.assertAlmostEqual(esser_primitive(1.0) - esser_primitive(0.5), -3 / 8, delta=1e-12)
        self.assertAlmostEqual(esser_primitive(1.0), 0.5 - math.pi ** 2 / 12, delta=1e-12)

    def test_primitive_is_odd_and_quadratically_small(self):
        for y in (0.9, 0.3, 0.07, 1e-3, 1e-6):
            self.assertEqual(esser_primitive(-y), -esser_primitive(y))
            self.assertLessEqual(abs(esser_primitive(y)), y * y / 2 + 1e-15)
        self.assertEqual(esser_primitive(0.0), 0.0)

    def test_primitive_increments_are_bounded(self):
        """Test |h(y2) - h(y1)| <= max(|y1|, |y2|) |y2 - y1| since |density(t)| <= |t|"""
        rng = np.random.default_rng(29)
        for y1, y2 in rng.uniform(-1.0, 1.0, size=(200, 2)):
            bound = max(abs(y1), abs(y2)) * abs(y2 - y1)
            self.assertLessEqual(abs(esser_primitive(y2) - esser_primitive(y1)), bound + 1e-12)

    def test_primitive_differentiates_to_density(self):
        e = 1e-6
        for y in (0.4, 0.6, 0.22, -0.15):
            slope = (esser_primitive(y + e) - esser_primitive(y - e)) / (2 * e)
            self.assertAlmostEqual(slope, esser_density(y), delta=1e-6)
