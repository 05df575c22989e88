import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lab.analysis.geometry import Domain, GridFunction, WarpingProfile, make_model
from lab.analysis.operators import (
    check_subsolution, hat, laplacian, lp_norm, pair_distributional, resolvent_positivity, schrodinger,
    solve_boundary_problem, spectral_bottom, weak_form_pair,
)
from lab.exceptions import PreconditionError

NODES = 201


def euclidean(n=3, r_max=5.0, nodes=NODES):
    return make_model(WarpingProfile.preset('euclidean'), n, (0.0, r_max), nodes)


def sinhc(r):
    safe = np.where(r == 0, 1.0, r)
    return np.where(r == 0, 1.0, np.sinh(safe) / safe)


class StrongActionTests(SimpleTestCase):
    def test_laplacian_of_r_squared(self):
        m, grid = euclidean(r_max=1.0, nodes=1001)
        Au = laplacian(m, grid).apply(GridFunction.sample(grid, lambda r: r ** 2))
        self.assertAlmostEqual(Au.values[500], 6.0, places=3)

    def test_sinhc_solves_the_resolvent_equation(self):
        m, grid = euclidean(nodes=1001)
        u = GridFunction.sample(grid, sinhc)
        Lu = schrodinger(m, grid, 1.0).apply(u)
        middle = slice(250, 750)
        self.assertLess(np.max(np.abs(Lu.values[middle])) / np.max(u.values[middle]), 1e-4)

    def test_negative_potential_is_rejected(self):
        m, grid = euclidean()
        with self.assertRaises(PreconditionError):
            schrodinger(m, grid, -1.0)

    def test_callable_potential(self):
        m, grid = euclidean()
        A = schrodinger(m, grid, lambda r: 1.0 + r)
        self.assertAlmostEqual(A.lam[-1], 6.0)
        self.assertEqual(A.name, 'schrodinger')


class PairingTests(SimpleTestCase):
    @settings(deadline=None, max_examples=50)
    @given(arrays(np.float64, NODES, elements=st.floats(-10, 10)),
           arrays(np.float64, NODES, elements=st.floats(-10, 10)),
           st.sampled_from(['euclidean', 'hyperbolic']),
           st.sampled_from([0.0, 1.0]))
    def test_distributional_and_weak_pairings_agree(self, u, phi, kind, lam):
        m, grid = make_model(WarpingProfile.preset(kind), 3, (0.0, 5.0), NODES)
        phi = phi.copy()
        phi[0] = phi[-1] = 0.0
        A = schrodinger(m, grid, lam)
        distributional = pair_distributional(GridFunction(grid, u), GridFunction(grid, phi), A)
        weak = weak_form_pair(GridFunction(grid, u), GridFunction(grid, phi), A)
        scale = (np.sum(np.abs(u) * (np.abs(A.stiffness(phi)) + np.abs(phi) * A.measure))
                 + np.sum(np.abs(A.flux(phi) * np.diff(u))) + 1.0)
        self.assertLessEqual(abs(distributional - weak), 1e-12 * scale)

    def test_test_function_must_vanish_at_the_ends(self):
        m, grid = euclidean()
        with self.assertRaises(PreconditionError):
            pair_distributional(GridFunction.constant(grid, 1.0), GridFunction.constant(grid, 1.0),
                                laplacian(m, grid))

    def test_kink_carries_a_positive_singular_part(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(0.5, 2.0, 'open', 'truncation'), 151)
        u = GridFunction(grid, np.maximum(-1.0, -1.0 / grid.nodes))
        A = laplacian(m, grid)
        kink = int(np.argmin(np.abs(grid.nodes - 1.0)))
        pairing = pair_distributional(u, hat(grid, kink), A)
        self.assertGreater(pairing, 0.0)
        self.assertAlmostEqual(pairing, grid.w_half[kink] * 1.0, delta=0.05 * grid.w_half[kink])


class CertificateTests(SimpleTestCase):
    def test_resolvent_solution_passes(self):
        m, grid = euclidean(nodes=501)
        cert = check_subsolution(GridFunction.sample(grid, sinhc), schrodinger(m, grid, 1.0))
        self.assertTrue(cert.passed)

    def test_concave_function_fails_inside(self):
        m, grid = euclidean()
        cert = check_subsolution(GridFunction.sample(grid, lambda r: -r ** 2), laplacian(m, grid))
        self.assertFalse(cert.passed)
        self.assertTrue(0 < cert.worst_node < grid.size - 1)

    def test_kink_passes_including_the_kink_node(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(0.5, 2.0, 'open', 'truncation'), 151)
        cert = check_subsolution(GridFunction(grid, np.maximum(-1.0, -1.0 / grid.nodes)), laplacian(m, grid))
        self.assertTrue(cert.passed)
        self.assertEqual(cert.hats, grid.size - 2)

    def test_constant_is_not_a_subsolution_of_the_resolvent_operator(self):
        m, grid = euclidean()
        A = schrodinger(m, grid, 1.0)
        self.assertFalse(check_subsolution(GridFunction.constant(grid, 1.0), A).passed)
        self.assertTrue(check_subsolution(GridFunction.constant(grid, -1.0), A).passed)

    def test_ball_norm(self):
        _, grid = euclidean(r_max=1.0, nodes=2001)
        self.assertAlmostEqual(lp_norm(GridFunction.constant(grid, 1.0), 2), math.sqrt(4 * math.pi / 3), places=5)


class SpectralBottomTests(SimpleTestCase):
    def setUp(self):
        self.m, self.grid = make_model(WarpingProfile.preset('flat'), 1, (0.0, math.pi), 2001)
        self.A = laplacian(self.m, self.grid)

    def test_dirichlet_interval(self):
        self.assertAlmostEqual(spectral_bottom(self.A), 1.0, places=5)

    def test_constant_potential_shifts_the_bottom(self):
        self.assertAlmostEqual(spectral_bottom(self.A, potential=-0.5), 0.5, places=5)

    def test_smaller_domain_has_larger_bottom(self):
        half = spectral_bottom(self.A, (0.0, math.pi / 2))
        self.assertAlmostEqual(half, 4.0, places=4)
        self.assertGreater(half, spectral_bottom(self.A))

    def test_too_small_domain(self):
        with self.assertRaises(PreconditionError):
            spectral_bottom(self.A, (0.0, 2 * self.grid.h))


class BoundaryProblemTests(SimpleTestCase):
    def test_zero_source_gives_zero(self):
        m, grid = euclidean()
        u = solve_boundary_problem(schrodinger(m, grid, 1.0), source=0.0)
        self.assertEqual(u.sup_norm(), 0.0)

    def test_unit_source_gives_positive_solution(self):
        m, grid = euclidean()
        u = solve_boundary_problem(schrodinger(m, grid, 1.0), source=-1.0)
        self.assertGreater(u.values.min(), 0.0)
        # with a natural truncation the constant 1 solves it exactly
        np.testing.assert_allclose(u.values, 1.0, rtol=1e-6)

    def test_open_end_needs_a_value(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(1.0, 2.0, 'open', 'truncation'), 51)
        with self.assertRaises(PreconditionError):
            solve_boundary_problem(laplacian(m, grid))

    def test_dirichlet_harmonic_interpolation(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(1.0, 2.0, 'open', 'boundary'), 51)
        u = solve_boundary_problem(laplacian(m, grid), left=-1.0, right=-0.5)
        np.testing.assert_allclose(u.values, -1.0 / grid.nodes, rtol=1e-10)


class ResolventPositivityTests(SimpleTestCase):
    def test_euclidean_truncation(self):
        m, grid = euclidean(r_max=10.0, nodes=200)
        report = resolvent_positivity(m, grid)
        self.assertTrue(report.passed)
        self.assertTrue(report.sign_pattern)

    def test_hyperbolic_truncation(self):
        m, grid = make_model(WarpingProfile.preset('hyperbolic'), 2, (0.0, 10.0), 200)
        self.assertTrue(resolvent_positivity(m, grid).passed)

    def test_negative_shift_loses_the_maximum_principle(self):
        m, grid = make_model(WarpingProfile.preset('flat'), 1, (0.0, 2 * math.pi), 200)
        report = resolvent_positivity(m, grid, shift=-1.0)
        self.assertFalse(report.passed)
        self.assertFalse(report.sign_pattern)
