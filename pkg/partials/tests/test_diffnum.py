import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings, strategies as st

from partials.diffnum import (
    EXCLUDED, MISMATCH, PASS, DerivativeEstimate, classical_hypotheses, first_step,
    mixed_cross, mixed_iterated, mixed_step, oracle_gaps, partial, schwarz_audit,
)
from partials.expr import parse
from partials.funcs import Function2D, Rectangle, builtin, from_expr

SQUARE = Rectangle(-1, 1, -1, 1)


def random_points(count, seed=7, low=-0.9, high=0.9):
    rng = np.random.default_rng(seed)
    return [tuple(p) for p in rng.uniform(low, high, size=(count, 2))]


class StepPolicyTestCase(SimpleTestCase):

    def test_steps_are_powers_of_two(self):
        self.assertEqual(first_step(0.5), 2.0 ** -17)
        self.assertEqual(first_step(-8.0), 2.0 ** -14)
        self.assertEqual(mixed_step(0.0), 2.0 ** -13)
        self.assertEqual(mixed_step(8.0), 2.0 ** -10)

    def test_estimate_invariants(self):
        with self.assertRaises(ValueError):
            DerivativeEstimate(value=1.0, step=0.0, scheme='central', error_indicator=0.0)
        with self.assertRaises(ValueError):
            DerivativeEstimate(value=1.0, step=1e-3, scheme='central', error_indicator=-1.0)
        excluded = DerivativeEstimate.excluded_at(1e-3, 'central')
        self.assertTrue(excluded.excluded)
        self.assertTrue(math.isnan(excluded.value))


class PartialTestCase(SimpleTestCase):

    def test_smooth_poly_oracle(self):
        """Test d/dx (x^3 y + x y^2) at (1, 1) = 4"""
        f = builtin('smooth_poly').with_domain(Rectangle(-2, 2, -2, 2))
        estimate = partial(f, 'x', (1.0, 1.0))
        self.assertAlmostEqual(estimate.value, 4.0, delta=1e-8)
        self.assertEqual(estimate.scheme, 'central')
        self.assertFalse(estimate.excluded)

    def test_linear_functions_are_exact(self):
        f = from_expr(parse('x'), SQUARE)
        for p in ((0.3, -0.2), (0.0, 0.0), (-0.71, 0.5)):
            for scheme in ('central', 'forward', 'backward', 'richardson'):
                with self.subTest(point=p, scheme=scheme):
                    estimate = partial(f, 'x', p, scheme=scheme)
                    self.assertEqual(estimate.value, 1.0)
                    self.assertEqual(estimate.error_indicator, 0.0)
                    self.assertLess(estimate.rounding, 1e-9)

    def test_quadratics_are_exact_at_dyadic_points(self):
        """Test that central quotients of x^2 + 3xy carry no truncation or rounding error"""
        f = from_expr(parse('x*x + 3*x*y'), SQUARE)
        for x, y in ((0.5, 0.25), (-0.75, 0.5), (0.25, -0.125)):
            with self.subTest(point=(x, y)):
                self.assertEqual(partial(f, 'x', (x, y)).value, 2 * x + 3 * y)
                self.assertEqual(partial(f, 'y', (x, y)).value, 3 * x)

    def test_kink_is_flagged(self):
        """Test that |y| at 0 gives the central value 0 with a large indicator"""
        estimate = partial(builtin('abs_mix'), 'y', (1.0, 0.0))
        self.assertEqual(estimate.value, 0.0)
        self.assertTrue(estimate.kinked)
        self.assertGreaterEqual(estimate.error_indicator, 1.0)
        self.assertAlmostEqual(estimate.asymmetry, 2.0, places=12)

    def test_boundary_points_use_one_sided_stencils(self):
        f = builtin('xy')
        self.assertEqual(partial(f, 'x', (1.0, 0.5)).scheme, 'backward')
        self.assertEqual(partial(f, 'x', (-1.0, 0.5)).scheme, 'forward')
        self.assertEqual(partial(f, 'x', (-1.0, 0.5)).value, 0.5)

    def test_failed_stencil_falls_back(self):
        """Test the forward fallback when the left neighbour is undefined"""
        f = Function2D(lambda x, y: 2 * x if x >= 0 else math.sqrt(x), SQUARE)
        estimate = partial(f, 'x', (0.0, 0.0))
        self.assertEqual(estimate.scheme, 'forward')
        self.assertEqual(estimate.value, 2.0)

    def test_every_stencil_failing_excludes(self):
        f = Function2D(lambda x, y: 1 / 0, SQUARE)
        estimate = partial(f, 'y', (0.0, 0.0))
        self.assertTrue(estimate.excluded)
        self.assertTrue(math.isnan(estimate.value))

    def test_bad_arguments(self):
        f = builtin('xy')
        with self.assertRaises(ValueError):
            partial(f, 'z', (0.0, 0.0))
        with self.assertRaises(ValueError):
            partial(f, 'x', (2.0, 0.0))
        with self.assertRaises(ValueError):
            partial(f, 'x', (0.0, 0.0), scheme='spline')
        with self.assertRaises(ValueError):
            partial(f, 'x', (0.0, 0.0), h0=-1.0)
        with self.assertRaises(ValueError):
            partial(f, 'x', (0.0, 0.0), levels=1)


class MixedTestCase(SimpleTestCase):

    def test_peano_order_sensitivity(self):
        """Test d21 = -1 and d12 = +1 for the Peano function at the origin"""
        f = builtin('peano')
        self.assertAlmostEqual(mixed_iterated(f, ('x', 'y'), (0.0, 0.0)).value, -1.0, delta=1e-3)
        self.assertAlmostEqual(mixed_iterated(f, ('y', 'x'), (0.0, 0.0)).value, 1.0, delta=1e-3)

        # the symmetric double difference sees neither order
        cross = mixed_cross(f, (0.0, 0.0), 1e-3, 1e-3)
        self.assertAlmostEqual(cross.value, 0.0, delta=1e-12)

    def test_mixed_matches_oracle_on_smooth_functions(self):
        for name in ('smooth_poly', 'trig'):
            f = builtin(name)
            for p in ((0.2, -0.4), (0.75, 0.5)):
                with self.subTest(name=name, point=p):
                    self.assertAlmostEqual(mixed_iterated(f, 'xy', p).value, f.oracle_d21(*p), delta=1e-5)
                    self.assertAlmostEqual(mixed_iterated(f, 'yx', p).value, f.oracle_d12(*p), delta=1e-5)

    def test_explicit_steps_and_levels(self):
        """Test that two levels stop at half the given outer step"""
        f = builtin('smooth_poly')
        estimate = mixed_iterated(f, ('x', 'y'), (0.5, 0.5), outer_step=2.0 ** -8,
                                  inner_step=2.0 ** -9, levels=2)
        self.assertEqual(estimate.step, 2.0 ** -9)
        self.assertAlmostEqual(estimate.value, f.oracle_d21(0.5, 0.5), delta=1e-7)
        with self.assertRaises(ValueError):
            mixed_iterated(f, ('x', 'y'), (0.5, 0.5), levels=1)

    def test_mixed_order_needs_two_axes(self):
        with self.assertRaises(ValueError):
            mixed_iterated(builtin('xy'), ('x', 'x'), (0.0, 0.0))

    def test_cross_is_exact_on_bilinear(self):
        estimate = mixed_cross(builtin('xy'), (0.25, -0.5), 2.0 ** -4, 2.0 ** -5)
        self.assertEqual(estimate.value, 1.0)
        self.assertEqual(estimate.error_indicator, 0.0)

    def test_cross_stencil_must_fit(self):
        with self.assertRaises(ValueError):
            mixed_cross(builtin('xy'), (0.9, 0.0), 0.5, 0.5)
        with self.assertRaises(ValueError):
            mixed_cross(builtin('xy'), (0.0, 0.0), 0.0, 0.1)

    @settings(max_examples=100, deadline=None)
    @given(
        x=st.floats(min_value=-0.8, max_value=0.8),
        y=st.floats(min_value=-0.8, max_value=0.8),
        h=st.floats(min_value=1e-4, max_value=0.1),
        k=st.floats(min_value=1e-4, max_value=0.1),
    )
    def test_cross_transpose_symmetry(self, x, y, h, k):
        """Test that transposing f and the point gives the bit-identical quotient"""
        f = builtin('peano')
        direct = mixed_cross(f, (x, y), h, k)
        swapped = mixed_cross(f.transposed(), (y, x), k, h)
        self.assertEqual(direct.value, swapped.value)
        self.assertEqual(direct.error_indicator, swapped.error_indicator)


class SchwarzAuditTestCase(SimpleTestCase):

    def test_smooth_corpus_passes(self):
        for name in ('smooth_poly', 'trig'):
            with self.subTest(name=name):
                report = schwarz_audit(builtin(name), nx=51, ny=51, tol=1e-5)
                self.assertEqual(report.mismatch_fraction, 0.0)
                self.assertEqual(report.excluded_fraction, 0.0)
                self.assertLessEqual(report.max_discrepancy, 1e-5)
                self.assertEqual(len(report.nodes), 51 * 51)
                self.assertEqual(report.counts[PASS], 51 * 51)

    def test_peano_mismatch_sits_at_the_origin(self):
        report = schwarz_audit(builtin('peano'), nx=21, ny=21, tol=1e-5)
        self.assertGreater(report.mismatch_fraction, 0.0)
        self.assertGreater(report.max_discrepancy, 1.0)
        x, y = report.argmax_point
        self.assertLess(abs(x), 0.05)
        self.assertLess(abs(y), 0.05)

        # fractions partition the grid
        total = report.pass_fraction + report.mismatch_fraction + report.excluded_fraction
        self.assertAlmostEqual(total, 1.0, places=12)
        self.assertEqual(len(report.row_mismatch), 21)
        self.assertEqual(len(report.column_mismatch), 21)

    def test_argmax_is_a_node_maximum(self):
        report = schwarz_audit(builtin('abs_mix'), nx=9, ny=9, tol=1e-5)
        scored = [n for n in report.nodes if n.status != EXCLUDED]
        best = max(n.delta for n in scored)
        self.assertEqual(report.max_discrepancy, best)
        self.assertIn(report.argmax_point, [(n.x, n.y) for n in scored if n.delta == best])

    def test_undefined_region_is_excluded(self):
        f = from_expr(parse('if x < 0 then log(x) else x*y'), SQUARE)
        report = schwarz_audit(f, nx=6, ny=5, tol=1e-5)
        self.assertGreater(report.excluded_fraction, 0.0)
        self.assertEqual(report.counts[MISMATCH], 0)
        self.assertTrue(all(n.status == EXCLUDED for n in report.nodes if n.x < -0.01))

    def test_rejects_tiny_grids(self):
        with self.assertRaises(ValueError):
            schwarz_audit(builtin('xy'), nx=2, ny=5)
        with self.assertRaises(ValueError):
            schwarz_audit(builtin('xy'), tol=0.0)


class OracleGapTestCase(SimpleTestCase):

    def test_random_points_agree_with_oracles(self):
        points = random_points(100)
        for name in ('smooth_poly', 'trig'):
            with self.subTest(name=name):
                report = oracle_gaps(builtin(name), points)
                self.assertEqual(report.points, 100)
                self.assertLessEqual(report.max_gap['d21'], 1e-5)
                self.assertLessEqual(report.max_gap['d12'], 1e-5)
                self.assertLessEqual(report.max_gap['d1'], 1e-8)
                self.assertLessEqual(report.max_gap['d2'], 1e-8)
                self.assertEqual(sum(report.excluded.values()), 0)

    def test_functions_without_oracles(self):
        report = oracle_gaps(from_expr(parse('x*y'), SQUARE), [(0.0, 0.0)])
        self.assertEqual(report.max_gap, {})


class ClassicalHypothesesTestCase(SimpleTestCase):

    def test_smooth_point_satisfies_every_condition(self):
        result = classical_hypotheses(builtin('smooth_poly'), (0.2, 0.3))
        self.assertTrue(result.schwarz)
        self.assertTrue(result.peano)
        self.assertTrue(result.young)

    def test_peano_origin_fails_every_condition(self):
        result = classical_hypotheses(builtin('peano'), (0.0, 0.0))
        self.assertFalse(result.schwarz)
        self.assertFalse(result.peano)
        self.assertFalse(result.young)

    def test_rings_must_fit(self):
        with self.assertRaises(ValueError):
            classical_hypotheses(builtin('xy'), (0.995, 0.0))


class WorkerPoolTestCase(SimpleTestCase):

    def test_thread_count_does_not_change_the_audit(self):
        """Test that a pooled audit reproduces the in-process one node for node"""
        f = builtin('peano')
        serial = schwarz_audit(f, f.domain, 9, 7)
        with override_settings(MIXCHECK_THREADS=4):
            pooled = schwarz_audit(f, f.domain, 9, 7)
        self.assertEqual(serial.nodes, pooled.nodes)
        self.assertEqual(serial.max_discrepancy, pooled.max_discrepancy)
