import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from lab.analysis.geometry import Domain, GridFunction, WarpingProfile, make_model
from lab.analysis.groundstate import (
    GroundState, closed_form_ground_state, ground_state_for, local_ground_state, solve_dirichlet_ground,
    transport_certificates, verify_pw_identity,
)
from lab.analysis.operators import laplacian, schrodinger
from lab.exceptions import DiscretizationError, PreconditionError
from lab.harness.registry import pointwise_residual


def bump(grid):
    values = np.sin(np.pi * (grid.nodes - grid.r_min) / (grid.r_max - grid.r_min)) ** 2
    values[0] = values[-1] = 0.0
    return GridFunction(grid, values)


class DirichletGroundStateTests(SimpleTestCase):
    def test_flat_interval_gives_cosh(self):
        m, grid = make_model(WarpingProfile.preset('flat'), 1, Domain(-1.0, 1.0, 'open', 'boundary'), 801)
        gs = solve_dirichlet_ground(schrodinger(m, grid, 1.0), c=math.cosh(1.0))
        np.testing.assert_allclose(gs.alpha.values, np.cosh(grid.nodes), rtol=1e-5)

    def test_euclidean_ball_gives_sinhc(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, Domain(0.0, 1.0, 'pole', 'boundary'), 801)
        gs = solve_dirichlet_ground(schrodinger(m, grid, 1.0), c=math.sinh(1.0))
        expected = closed_form_ground_state('euclidean', 3, 1.0)(grid.nodes)
        np.testing.assert_allclose(gs.alpha.values, expected, rtol=1e-4)

    def test_boundary_value_must_be_positive(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, (0.0, 1.0), 51)
        with self.assertRaises(PreconditionError):
            solve_dirichlet_ground(laplacian(m, grid), c=0.0)

    def test_non_positive_alpha_is_refused(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 3, (0.0, 1.0), 51)
        values = np.ones(grid.size)
        values[10] = -1.0
        with self.assertRaises(DiscretizationError):
            GroundState.build(laplacian(m, grid), values, 1.0)

    def test_closed_forms(self):
        self.assertIsNone(closed_form_ground_state('euclidean', 2, 1.0))
        self.assertEqual(float(closed_form_ground_state('euclidean', 3, 1.0)(0.0)), 1.0)
        self.assertAlmostEqual(float(closed_form_ground_state('hyperbolic', 3, 1.0)(0.0)), math.sqrt(2.0))


class LocalGroundStateTests(SimpleTestCase):
    def test_window_shrinks_until_the_bottom_is_positive(self):
        m, grid = make_model(WarpingProfile.preset('flat'), 1, (0.0, 10.0), 1001)
        state, bottom = local_ground_state(laplacian(m, grid), -1.0, 5.0, 5.0)
        self.assertGreater(bottom, 0.0)
        self.assertLess(state.grid.r_max - state.grid.r_min, math.pi)
        self.assertGreater(state.alpha.values.min(), 0.0)

    def test_nonnegative_constant_is_refused(self):
        m, grid = make_model(WarpingProfile.preset('flat'), 1, (0.0, 10.0), 101)
        with self.assertRaises(PreconditionError):
            local_ground_state(laplacian(m, grid), 1.0, 5.0, 1.0)


class PWIdentityTests(SimpleTestCase):
    def setUp(self):
        self.m, self.grid = make_model(WarpingProfile.preset('euclidean'), 3, (0.0, 5.0), 501)
        self.gs = ground_state_for(self.m, self.grid, 1.0)

    def test_adjoint_residual_is_at_rounding_level(self):
        residual = verify_pw_identity(self.gs, bump(self.grid), v=np.linspace(0.5, 1.5, self.grid.size))
        self.assertLessEqual(residual.adjoint, 1e-12 * residual.scale)

    def test_test_function_must_vanish_at_the_ends(self):
        with self.assertRaises(PreconditionError):
            verify_pw_identity(self.gs, GridFunction.constant(self.grid, 1.0))

    @settings(deadline=None, max_examples=20)
    @given(st.floats(min_value=0.5, max_value=2.0), st.floats(min_value=0.05, max_value=0.95))
    def test_certificates_transport_in_both_directions(self, a, fraction):
        alpha = self.gs.alpha.values
        b = fraction * float(alpha.max())
        u = GridFunction(self.grid, a * alpha - b)
        plain, weighted = transport_certificates(u, self.gs)
        self.assertTrue(plain.passed)
        self.assertTrue(weighted.passed)
        plain, weighted = transport_certificates(-u, self.gs)
        self.assertFalse(plain.passed)
        self.assertFalse(weighted.passed)


class PointwiseResidualTests(SimpleTestCase):
    def test_second_order_under_refinement(self):
        for kind in ('euclidean', 'hyperbolic'):
            with self.subTest(kind=kind):
                errors = []
                for nodes in (201, 401, 801):
                    m, grid = make_model(WarpingProfile.preset(kind), 3, (0.0, 4.0), nodes)
                    errors.append(pointwise_residual(m, grid, 1.0))
                slopes = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
                self.assertGreaterEqual(min(slopes), 1.9)

    def test_no_closed_form(self):
        m, grid = make_model(WarpingProfile.preset('euclidean'), 2, (0.0, 4.0), 101)
        self.assertIsNone(pointwise_residual(m, grid, 1.0))
