from django.db import models

from ..harness.emit import plain


class ExperimentRun(models.Model):
    """Stored result of one `manage.py run --record` invocation."""
    experiment = models.CharField(max_length=50)
    entry = models.CharField(max_length=60, blank=True)
    # u64 seeds do not fit SQLite's signed integers
    seed = models.CharField(max_length=20)
    refine = models.PositiveIntegerField(null=True, blank=True)
    config = models.JSONField(default=dict)
    report = models.JSONField(default=dict)
    verdict = models.CharField(max_length=10)
    exit_code = models.PositiveSmallIntegerField()
    wall_time = models.FloatField(default=0.0)
    report_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        label = f'{self.experiment} ({self.entry})' if self.entry else self.experiment
        return f"{label} - {self.verdict} ({self.created_at})"

    @classmethod
    def record(cls, report, report_path=''):
        return cls.objects.create(
            experiment=report.experiment,
            entry=report.config.get('entry') or '',
            seed=str(report.seed),
            refine=report.config.get('refine'),
            config=plain(report.config),
            report=plain(report.as_dict()),
            verdict=report.verdict,
            exit_code=report.exit_code,
            wall_time=report.wall_time,
            report_path=str(report_path),
        )
