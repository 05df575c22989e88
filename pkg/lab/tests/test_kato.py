import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from lab.analysis.geometry import GridFunction, WarpingProfile, make_model
from lab.analysis.kato import (
    brezis_kato_check, check_on_cover, h_epsilon, h_epsilon_prime, kato_via_appendix, positive_part_certificate,
)
from lab.analysis.operators import schrodinger
from lab.exceptions import PreconditionError


def sign_changing(r_max=2.0, nodes=401, shift=1.1):
    m, grid = make_model(WarpingProfile.preset('euclidean'), 3, (0.0, r_max), nodes)
    safe = np.where(grid.nodes == 0, 1.0, grid.nodes)
    values = np.where(grid.nodes == 0, 1.0, np.sinh(safe) / safe) - shift
    return m, grid, GridFunction(grid, values)


class RegularizationTests(SimpleTestCase):
    def test_no_cancellation_for_large_negative_arguments(self):
        value = h_epsilon(-1e8, 1.0)
        self.assertGreater(value, 0.0)
        self.assertAlmostEqual(value / 2.5e-9, 1.0, places=6)

    def test_sup_distance_is_attained_at_zero(self):
        for eps in (1.0, 0.01):
            t = np.linspace(-10.0, 10.0, 20001)
            gap = np.max(np.abs(h_epsilon(t, eps) - np.maximum(t, 0.0)))
            self.assertAlmostEqual(gap, math.sqrt(eps) / 2.0, places=12)

    @settings(deadline=None, max_examples=100)
    @given(st.floats(min_value=-1e6, max_value=1e6), st.floats(min_value=1e-8, max_value=1e2))
    def test_envelope(self, t, eps):
        value = h_epsilon(t, eps)
        self.assertGreaterEqual(value, max(t, 0.0) - 1e-9 * max(1.0, abs(t)))
        self.assertLessEqual(value - max(t, 0.0), math.sqrt(eps) / 2.0 * (1 + 1e-9) + 1e-9 * abs(t))
        slope = h_epsilon_prime(t, eps)
        self.assertTrue(0.0 <= slope <= 1.0)

    def test_eps_must_be_positive(self):
        with self.assertRaises(PreconditionError):
            h_epsilon(1.0, 0.0)


class BrezisKatoTests(SimpleTestCase):
    def test_sign_changing_input_passes_both_routes(self):
        _, grid, u = sign_changing()
        self.assertLess(u.values.min(), 0.0)
        self.assertGreater(u.values.max(), 0.0)
        regularization = brezis_kato_check(u, 1.0)
        appendix = kato_via_appendix(u, 1.0, K=4)
        self.assertTrue(regularization.passed)
        self.assertTrue(appendix.passed)
        agreement = appendix.extras['agreement']
        self.assertTrue(agreement['same_verdict'])
        self.assertLessEqual(agreement['min_pairing_gap'], agreement['combined_tolerance'])

    def test_appendix_verdict_needs_every_stage(self):
        _, _, u = sign_changing()
        appendix = kato_via_appendix(u, 1.0, K=4)
        self.assertEqual(set(appendix.conditions), {'ancona', 'approximation'})
        self.assertTrue(appendix.extras['approximation']['passed'])
        expected = (appendix.output_certificate.passed and appendix.extras['ancona_passed']
                    and appendix.extras['approximation']['passed'])
        self.assertEqual(appendix.passed, expected)
        self.assertEqual(appendix.as_dict()['conditions'], appendix.conditions)

    def test_failed_stage_fails_the_route(self):
        _, _, u = sign_changing()
        appendix = kato_via_appendix(u, 1.0, K=4)
        self.assertTrue(appendix.output_certificate.passed)
        broken = replace(appendix, conditions={**appendix.conditions, 'ancona': False})
        self.assertFalse(broken.passed)

    def test_appendix_reports_the_iterate_limit(self):
        _, _, u = sign_changing()
        appendix = kato_via_appendix(u, 1.0, K=4)
        limit = appendix.extras['iterate_limit']
        last = appendix.ladder[-1]
        self.assertEqual(limit['k'], 4)
        self.assertEqual(limit['min_pairing'], last['min_ancona_pairing'])
        self.assertAlmostEqual(limit['gap_to_certificate'],
                               last['min_ancona_pairing'] - appendix.output_certificate.min_pairing)
        self.assertTrue(limit['passed'])

    def test_randomized_sign_changing_inputs_agree(self):
        rng = np.random.default_rng(20240601)
        for sample in range(10):
            shift = rng.uniform(1.05, 1.75)
            with self.subTest(sample=sample, shift=shift):
                _, _, u = sign_changing(shift=shift)
                self.assertLess(u.values.min(), 0.0)
                self.assertGreater(u.values.max(), 0.0)
                regularization = brezis_kato_check(u, 1.0)
                appendix = kato_via_appendix(u, 1.0, K=4)
                agreement = appendix.extras['agreement']
                self.assertTrue(regularization.passed)
                self.assertTrue(appendix.passed)
                self.assertTrue(agreement['same_verdict'])
                self.assertLessEqual(agreement['min_pairing_gap'], agreement['combined_tolerance'])

    def test_ladder_approaches_the_limit(self):
        _, _, u = sign_changing()
        report = brezis_kato_check(u, 1.0)
        gaps = [abs(row['gap_to_limit']) for row in report.ladder]
        self.assertLess(gaps[-1], gaps[0])
        for coarse, fine in zip(gaps, gaps[1:]):
            self.assertLessEqual(fine, coarse * (1 + 1e-9))

    def test_ladder_envelope(self):
        _, _, u = sign_changing()
        report = brezis_kato_check(u, 1.0)
        self.assertEqual(len(report.ladder), 5)
        for row in report.ladder:
            self.assertLessEqual(row['sup_deviation'], 1.1 * row['deviation_bound'])
            self.assertLessEqual(row['max_h_prime'], 1.0)
        eps = [row['eps'] for row in report.ladder]
        self.assertEqual(eps, sorted(eps, reverse=True))

    def test_uncertified_input_is_refused(self):
        _, _, u = sign_changing()
        with self.assertRaises(PreconditionError):
            brezis_kato_check(-u, 1.0)

    def test_positive_part_certificate(self):
        _, _, u = sign_changing()
        self.assertTrue(positive_part_certificate(u, 1.0).passed)


class CoverTests(SimpleTestCase):
    def test_pieces_and_union_agree(self):
        m, grid, u = sign_changing()
        A = schrodinger(m, grid, 1.0)
        report = check_on_cover(u, A, [(0.0, 1.2), (0.8, 2.0)])
        self.assertTrue(report.passed)
        self.assertTrue(report.consistent)

    def test_pieces_must_overlap(self):
        m, grid, u = sign_changing()
        with self.assertRaises(PreconditionError):
            check_on_cover(u, schrodinger(m, grid, 1.0), [(0.0, 1.0), (1.0, 2.0)])
