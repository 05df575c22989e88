import csv

from django.core.management.base import BaseCommand, CommandError

from lab.models import ExperimentRun

COLUMNS = ['id', 'created_at', 'experiment', 'entry', 'seed', 'refine', 'verdict', 'exit_code', 'wall_time',
           'report_path']


class Command(BaseCommand):
    help = 'List recorded experiment runs, newest first, or export them as CSV'

    def add_arguments(self, parser):
        parser.add_argument('--limit', type=int, default=20)
        parser.add_argument('--csv', dest='csv_path', help='Write the listed runs to this CSV file')

    def handle(self, *args, **options):
        if options['limit'] < 1:
            raise CommandError('--limit must be positive.', returncode=2)
        runs = list(ExperimentRun.objects.all()[:options['limit']])
        if not runs:
            self.stdout.write('No recorded runs.')
            return

        if options['csv_path']:
            with open(options['csv_path'], 'w', newline='', encoding='utf-8') as handle:
                writer = csv.writer(handle)
                writer.writerow(COLUMNS)
                for item in runs:
                    writer.writerow([getattr(item, column) for column in COLUMNS])
            self.stdout.write(self.style.SUCCESS(f'Exported {len(runs)} runs to {options["csv_path"]}'))
            return

        for item in runs:
            line = f'#{item.id} {item.created_at:%Y-%m-%d %H:%M} {item}  seed={item.seed}  {item.wall_time:.2f}s'
            style = self.style.SUCCESS if item.exit_code == 0 else self.style.ERROR
            self.stdout.write(style(line))
        self.stdout.write(f'{ExperimentRun.objects.count()} runs recorded in total')
