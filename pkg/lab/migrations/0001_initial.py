# Generated by Django 5.2.8 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('experiment', models.CharField(max_length=50)),
                ('entry', models.CharField(blank=True, max_length=60)),
                ('seed', models.CharField(max_length=20)),
                ('refine', models.PositiveIntegerField(blank=True, null=True)),
                ('config', models.JSONField(default=dict)),
                ('report', models.JSONField(default=dict)),
                ('verdict', models.CharField(max_length=10)),
                ('exit_code', models.PositiveSmallIntegerField()),
                ('wall_time', models.FloatField(default=0.0)),
                ('report_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
    ]
