import logging

from django.core.management.base import BaseCommand, CommandError

from lab.exceptions import ConfigurationError
from lab.harness.config import load_config, resolve_output_dir, validate_config
from lab.harness.emit import write_report, write_tables
from lab.harness.registry import EXPERIMENTS
from lab.harness.runner import PASS, run, sweep
from lab.models import ExperimentRun

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run one laboratory experiment (or a refinement sweep) and write its report and CSV tables'

    def add_arguments(self, parser):
        parser.add_argument('experiment', help=f'One of: {", ".join(EXPERIMENTS)}')
        parser.add_argument('--config', help='TOML file with [manifold], [analysis], [tolerances], [output]')
        parser.add_argument('--out', help='Report directory (overrides LAB_OUTPUT_DIR and [output] dir)')
        parser.add_argument('--seed', type=int, help='Seed for randomized suites')
        parser.add_argument('--refine', type=int, help='Number of refinement levels for a sweep (>= 2)')
        parser.add_argument('--record', action='store_true', help='Store the run in the history table')

    def handle(self, *args, **options):
        try:
            data = load_config(options['config']) if options['config'] else {}
            data['experiment'] = options['experiment']
            if options['seed'] is not None:
                data['seed'] = options['seed']
            if options['refine'] is not None:
                data['refine'] = options['refine']
            cfg = validate_config(data)
        except ConfigurationError as exc:
            raise CommandError(str(exc), returncode=2)

        out_dir = resolve_output_dir(options['out'], cfg)
        levels = cfg.get('refine')
        if levels:
            report = sweep(cfg, levels, seed=cfg.get('seed'))
        else:
            report = run(cfg, seed=cfg.get('seed'))

        path = write_report(report, out_dir)
        tables = write_tables(report, out_dir)
        if options['record']:
            ExperimentRun.record(report, path)

        self.stdout.write(f'Report: {path}')
        for table in tables:
            self.stdout.write(f'Table: {table}')
        if report.verdict == PASS:
            self.stdout.write(self.style.SUCCESS(f'{report.slug}: pass ({report.wall_time:.2f}s)'))
            return
        message = f'{report.slug}: {report.verdict}'
        if report.diagnostic:
            message += f' ({report.diagnostic})'
        self.stderr.write(self.style.ERROR(message))
        raise CommandError(message, returncode=report.exit_code)
