import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from lab.models import ExperimentRun


class RunCommandTests(TestCase):
    def setUp(self):
        self.out = Path(tempfile.mkdtemp())

    def write_config(self, text):
        path = self.out / 'lab.toml'
        path.write_text(text, encoding='utf-8')
        return str(path)

    def call(self, *args):
        stdout, stderr = StringIO(), StringIO()
        call_command('run', *args, stdout=stdout, stderr=stderr)
        return stdout.getvalue()

    def test_passing_run_writes_report_and_tables(self):
        config = self.write_config('[manifold]\nprofile = "euclidean"\nr_max = 8.0\nnodes = 401\n')
        output = self.call('pp', '--config', config, '--out', str(self.out))
        self.assertIn('pp: pass', output)
        document = json.loads((self.out / 'pp.json').read_text(encoding='utf-8'))
        self.assertEqual(document['exit_code'], 0)
        self.assertEqual(document['config']['nodes'], 401)
        self.assertTrue((self.out / 'pp-energy.csv').is_file())

    def test_invalid_config_exits_with_two(self):
        config = self.write_config('[manifold]\nprofile = "euclidian"\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('pp', '--config', config, '--out', str(self.out))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('Did you mean "euclidean"?', str(ctx.exception))
        self.assertFalse((self.out / 'pp.json').exists())

    def test_single_refinement_level_exits_with_two(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('pw-identity', '--refine', '1', '--out', str(self.out))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_config_file_exits_with_two(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('pp', '--config', str(self.out / 'missing.toml'))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_failing_verdict_exits_with_one(self):
        config = self.write_config('[manifold]\nr_max = 20.0\nnodes = 401\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('liouville', '--config', config, '--out', str(self.out), '--record')
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertTrue((self.out / 'liouville.json').is_file())
        run = ExperimentRun.objects.get()
        self.assertEqual((run.verdict, run.exit_code), ('fail', 1))

    def test_recorded_runs_show_up_in_history(self):
        config = self.write_config('[manifold]\nr_max = 8.0\nnodes = 401\n')
        self.call('pp', '--config', config, '--out', str(self.out), '--seed', '11', '--record')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.experiment, 'pp')
        self.assertEqual(int(run.seed), 11)
        self.assertEqual(run.report_path, str(self.out / 'pp.json'))

        stdout = StringIO()
        call_command('history', stdout=stdout)
        self.assertIn(f'#{run.id}', stdout.getvalue())
        self.assertIn('1 runs recorded in total', stdout.getvalue())

        export = self.out / 'history.csv'
        call_command('history', '--csv', str(export), stdout=StringIO())
        with open(export, newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(rows[0]['experiment'], 'pp')
        self.assertEqual(rows[0]['verdict'], 'pass')


class HistoryCommandTests(TestCase):
    def test_empty_history(self):
        stdout = StringIO()
        call_command('history', stdout=stdout)
        self.assertIn('No recorded runs.', stdout.getvalue())

    def test_limit_must_be_positive(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('history', '--limit', '0', stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
