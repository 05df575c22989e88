import csv
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lab.exceptions import ConfigurationError
from lab.harness.config import validate_config
from lab.harness.emit import plain, report_json, write_report, write_table, write_tables
from lab.harness.registry import EXPERIMENTS
from lab.harness.runner import ERROR, FAIL, PASS, ExperimentReport, convergence_slopes, refinement_levels, run, sweep


def config(**data):
    return validate_config(dict(data))


class RegistryTests(SimpleTestCase):
    def test_every_experiment_is_registered(self):
        expected = {'pw-identity', 'smoothing-abc', 'brezis-kato', 'caccioppoli', 'regularity', 'liouville',
                    'subquadratic', 'pp', 'counterexample', 'resolvent', 'consistency', 'spectral'}
        self.assertEqual(set(EXPERIMENTS), expected)


class RefinementTests(SimpleTestCase):
    def test_levels_keep_the_coarse_nodes(self):
        self.assertEqual(refinement_levels(101, 3), [101, 201, 401])

    def test_slopes(self):
        slopes = convergence_slopes([4.0, 1.0, 0.0])
        self.assertAlmostEqual(slopes[0], 2.0)
        self.assertIsNone(slopes[1])

    def test_single_level_is_rejected(self):
        with self.assertRaises(ConfigurationError):
            sweep(config(experiment='pw-identity'), 1)

    def test_second_order_residual(self):
        cfg = config(experiment='pw-identity', profile='hyperbolic', r_max=4.0, nodes=201, samples=3)
        report = sweep(cfg, 3)
        self.assertEqual(report.verdict, PASS)
        self.assertEqual([row['nodes'] for row in report.refinement], [201, 401, 801])
        self.assertAlmostEqual(report.refinement[-1]['slope'], 2.0, delta=0.2)
        self.assertIn('refinement', report.tables)


class RunTests(SimpleTestCase):
    def test_positivity_preserving_passes(self):
        report = run(config(experiment='pp', r_max=10.0, nodes=501))
        self.assertEqual(report.verdict, PASS)
        self.assertEqual(report.exit_code, 0)
        self.assertEqual(report.stages['conclusion'], 'nonnegative')

    def test_runs_are_deterministic_for_a_seed(self):
        cfg = config(experiment='resolvent', r_max=10.0, nodes=201, samples=3)
        first = json.loads(report_json(run(cfg, seed=7)))
        second = json.loads(report_json(run(cfg, seed=7)))
        for document in (first, second):
            document.pop('wall_time')
            document.pop('created_at')
        self.assertEqual(first, second)
        self.assertEqual(first['verdict'], PASS)

    def test_refusal_becomes_an_error_verdict(self):
        report = run(config(experiment='liouville', r_min=1.0, r_max=20.0, nodes=401))
        self.assertEqual(report.verdict, ERROR)
        self.assertEqual(report.exit_code, 1)
        self.assertTrue(report.diagnostic.startswith('IncompleteModelError'))

    def test_infinite_volume_constant_fails_liouville(self):
        report = run(config(experiment='liouville', r_max=20.0, nodes=401))
        self.assertEqual(report.verdict, FAIL)
        self.assertEqual(report.stages['verdict']['verdict'], 'not-applicable')

    def test_certificate_tolerance_comes_from_the_config(self):
        base = dict(experiment='smoothing-abc', r_min=0.5, r_max=4.0, left_kind='open', nodes=351,
                    omega=[0.5, 4.0])
        report = run(config(**base, tol=0.5))
        self.assertEqual(report.stages['input_certificate']['tolerance'], 0.5)
        default = run(config(**base))
        self.assertNotEqual(default.stages['input_certificate']['tolerance'], 0.5)
        self.assertGreater(default.stages['input_certificate']['tolerance'], 0.0)

    def test_finite_volume_constant_passes_liouville(self):
        cfg = config(experiment='liouville', profile='finite-volume', r_max=100.0, nodes=4001,
                     ks=[6.25, 12.5, 25.0, 50.0])
        report = run(cfg)
        self.assertEqual(report.verdict, PASS)
        self.assertTrue(report.stages['stable_under_truncation'])

    def test_spectral_bottom_of_an_interval(self):
        cfg = config(experiment='spectral', profile='flat', r_max=math.pi, right_kind='boundary', nodes=401)
        report = run(cfg)
        self.assertEqual(report.verdict, PASS)
        self.assertAlmostEqual(report.stages['bottoms'][0]['bottom'], 2.0, places=3)

    def test_counterexample_slug(self):
        cfg = config(experiment='counterexample', entry='hyperbolic-bounded-harmonic')
        self.assertEqual(run(cfg).slug, 'counterexample-hyperbolic-bounded-harmonic')


class EmitTests(SimpleTestCase):
    def setUp(self):
        self.out = Path(tempfile.mkdtemp())

    def test_plain_values(self):
        value = plain({'a': np.float64(math.inf), 'b': np.int64(3), 'c': np.array([0.5, math.nan]),
                       'd': (np.bool_(True), None)})
        self.assertEqual(value, {'a': 'inf', 'b': 3, 'c': [0.5, 'nan'], 'd': [True, None]})

    def test_report_file(self):
        report = ExperimentReport(experiment='pp', config={'entry': None}, seed=1, verdict=FAIL,
                                  stages={'slack': -math.inf})
        path = write_report(report, self.out)
        self.assertEqual(path.name, 'pp.json')
        document = json.loads(path.read_text(encoding='utf-8'))
        self.assertEqual(document['exit_code'], 1)
        self.assertEqual(document['stages']['slack'], '-inf')

    def test_table_header_and_cells(self):
        path = write_table([{'k': 1.0, 'rows': [1, 2]}, {'k': 2.0, 'extra': None}], self.out / 'table.csv')
        with open(path, newline='', encoding='utf-8') as handle:
            rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ['k', 'rows', 'extra'])
        self.assertEqual(rows[1], ['1.0', '[1, 2]', ''])
        self.assertEqual(rows[2], ['2.0', '', ''])

    def test_empty_tables_are_skipped(self):
        report = ExperimentReport(experiment='resolvent', config={}, seed=1, verdict=PASS,
                                  tables={'sources': [{'max_u': 1.0}], 'empty': []})
        paths = write_tables(report, self.out)
        self.assertEqual([p.name for p in paths], ['resolvent-sources.csv'])
