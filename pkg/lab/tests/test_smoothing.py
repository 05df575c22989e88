import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from lab.analysis.geometry import Domain, GridFunction, WarpingProfile, make_model
from lab.analysis.operators import check_subsolution, laplacian, schrodinger
from lab.analysis.smoothing import (
    convex_jumps, green_coordinate, mollifier, monotone_smooth_approx, ramp_profile, verify_approx_properties,
)
from lab.exceptions import DiscretizationError, PreconditionError


def kink_model(nodes=3501):
    m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(0.5, 4.0, 'open', 'truncation'), nodes)
    return m, grid, GridFunction(grid, np.maximum(-1.0, -1.0 / grid.nodes))


class KernelTests(SimpleTestCase):
    def test_unit_mass(self):
        x = np.linspace(-1.0, 1.0, 20001)
        self.assertAlmostEqual(np.trapezoid(mollifier(x), x), 1.0, places=7)

    def test_support(self):
        self.assertEqual(float(mollifier(np.array([1.5]))[0]), 0.0)
        self.assertEqual(float(mollifier(np.array([-1.0]))[0]), 0.0)

    def test_ramp_profile_ends(self):
        np.testing.assert_allclose(ramp_profile(np.array([-3.0, -1.0, 1.0, 3.0])), [0.0, 0.0, 1.0, 3.0], atol=1e-12)

    @settings(deadline=None, max_examples=50)
    @given(st.floats(min_value=-2.0, max_value=2.0))
    def test_ramp_profile_dominates_the_hinge(self, x):
        value = float(ramp_profile(np.array([x]))[0])
        self.assertGreaterEqual(value, max(x, 0.0) - 1e-12)


class GreenCoordinateTests(SimpleTestCase):
    def test_hyperbolic_closed_form(self):
        m, grid = make_model(WarpingProfile.preset('hyperbolic'), 2, Domain(1.0, 5.0, 'open', 'truncation'), 801)
        green = green_coordinate(grid)
        expected = (np.log(np.tanh(grid.nodes / 2.0)) - math.log(math.tanh(0.5))) / (2 * math.pi)
        np.testing.assert_allclose(green.t, expected, atol=1e-10)

    def test_pole_is_rejected(self):
        _, grid = make_model(WarpingProfile.preset('euclidean'), 3, (0.0, 1.0), 51)
        with self.assertRaises(PreconditionError):
            green_coordinate(grid)

    def test_subharmonic_means_convex_in_t(self):
        m, grid, u = kink_model(351)
        jumps = convex_jumps(u.values, green_coordinate(grid))
        self.assertGreaterEqual(jumps.min(), -1e-9 * np.abs(jumps).max())
        certificate = check_subsolution(u, laplacian(m, grid))
        self.assertTrue(certificate.passed)

    @settings(deadline=None, max_examples=20)
    @given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=8, max_size=8))
    def test_convexity_matches_hat_pairings(self, coefficients):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(1.0, 2.0, 'open', 'truncation'), 8)
        A = laplacian(m, grid)
        values = np.array(coefficients)
        pairings = A.hat_pairings(values)[1:-1]
        jumps = convex_jumps(values, green_coordinate(grid))
        np.testing.assert_allclose(pairings, jumps, rtol=1e-9, atol=1e-12)


class ApproximationTests(SimpleTestCase):
    def test_kink_sequence_properties(self):
        m, grid, u = kink_model()
        seq = monotone_smooth_approx(u, laplacian(m, grid), K=4)
        report = verify_approx_properties(seq)
        self.assertFalse(seq.floor_bound)
        self.assertTrue(report.monotone, report.monotone_witness)
        self.assertTrue(report.subsolutions)
        self.assertTrue(report.l1_decay)
        self.assertEqual(len(seq.iterates), 4)
        self.assertTrue(all(it.grid is seq.inner for it in seq.iterates))

    def test_kink_l1_error_quarters_per_step(self):
        m, grid, u = kink_model()
        seq = monotone_smooth_approx(u, laplacian(m, grid), K=4)
        report = verify_approx_properties(seq)
        ratios = [row['ratio'] for row in report.l1_table]
        self.assertIsNone(ratios[0])
        for ratio in ratios[1:]:
            self.assertGreaterEqual(ratio, 0.175)
            self.assertLessEqual(ratio, 0.325)

    def test_shuffled_sequence_has_a_monotonicity_witness(self):
        m, grid, u = kink_model()
        seq = monotone_smooth_approx(u, laplacian(m, grid), K=4)
        shuffled = replace(seq, iterates=[seq.iterates[i] for i in (2, 0, 3, 1)])
        report = verify_approx_properties(shuffled)
        self.assertFalse(report.monotone)
        witness = report.monotone_witness
        self.assertEqual(witness['property'], 'u_{k+1} <= u_k')
        self.assertLess(witness['gap'], 0.0)
        self.assertTrue(seq.inner.offset <= witness['node'] < seq.inner.offset + seq.inner.size)
        self.assertFalse(report.convergence)

    def test_iterates_agree_with_u_away_from_the_kink(self):
        m, grid, u = kink_model()
        seq = monotone_smooth_approx(u, laplacian(m, grid), K=4)
        last = seq.iterates[-1]
        far = seq.inner.nodes > 1.5
        self.assertTrue(far.any())
        np.testing.assert_allclose(last.values[far], seq.u.values[far], atol=1e-8)

    def test_smooth_resolvent_input(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(0.5, 3.0, 'open', 'truncation'), 2001)
        u = GridFunction.sample(grid, lambda r: np.sinh(r) / r)
        seq = monotone_smooth_approx(u, schrodinger(m, grid, 1.0), K=3)
        report = verify_approx_properties(seq, rel_tol=1e-10)
        self.assertTrue(report.monotone, report.monotone_witness)
        self.assertTrue(report.subsolutions)

    def test_non_subsolution_is_refused(self):
        m, grid, u = kink_model(351)
        with self.assertRaises(PreconditionError):
            monotone_smooth_approx(-u, laplacian(m, grid))

    def test_too_wide_mollifier(self):
        m, grid, u = kink_model(351)
        diameter = green_coordinate(grid).diameter
        with self.assertRaises(DiscretizationError):
            monotone_smooth_approx(u, laplacian(m, grid), eps0=0.6 * diameter)

    def test_k_must_be_at_least_two(self):
        m, grid, u = kink_model(351)
        with self.assertRaises(PreconditionError):
            monotone_smooth_approx(u, laplacian(m, grid), K=1)
