"""
Single runs and refinement sweeps of registered experiments.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from django.conf import settings
from tqdm import tqdm

from ..exceptions import ConfigurationError, LabError
from .registry import EXPERIMENTS, build_model

logger = logging.getLogger(__name__)

PASS, FAIL, ERROR = 'pass', 'fail', 'error'


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    verdict: str
    stages: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    refinement: list = field(default_factory=list)
    diagnostic: Optional[str] = None
    wall_time: float = 0.0
    created_at: str = ''

    @property
    def exit_code(self):
        return 0 if self.verdict == PASS else 1

    @property
    def slug(self):
        entry = self.config.get('entry')
        return f'{self.experiment}-{entry}' if entry else self.experiment

    def as_dict(self):
        return {
            'schema_version': settings.LAB_REPORT_SCHEMA_VERSION,
            'experiment': self.experiment,
            'config': self.config,
            'seed': self.seed,
            'verdict': self.verdict,
            'exit_code': self.exit_code,
            'stages': self.stages,
            'refinement': self.refinement,
            'tables': sorted(self.tables),
            'diagnostic': self.diagnostic,
            'wall_time': self.wall_time,
            'created_at': self.created_at,
        }


def _seed(cfg, seed):
    if seed is not None:
        return int(seed)
    if cfg.get('seed') is not None:
        return int(cfg['seed'])
    return int(settings.LAB_DEFAULT_SEED)


def _execute(cfg, seed, nodes=None):
    m, grid = build_model(cfg, nodes=nodes)
    rng = np.random.default_rng(seed)
    return EXPERIMENTS[cfg['experiment']](cfg, rng, m, grid)


def run(cfg, seed=None):
    """Execute cfg['experiment'] once; refusals and breakdowns become an error verdict with a diagnostic."""
    name = cfg['experiment']
    if name not in EXPERIMENTS:
        raise ConfigurationError(f'Unknown experiment "{name}". Choose one of: {", ".join(EXPERIMENTS)}.')
    seed = _seed(cfg, seed)
    logger.info('Running %s (seed %d, %d nodes)', name, seed, cfg['nodes'])
    started = time.perf_counter()
    report = ExperimentReport(experiment=name, config=dict(cfg), seed=seed, verdict=ERROR,
                              created_at=datetime.now(timezone.utc).isoformat())
    try:
        outcome = _execute(cfg, seed)
    except LabError as exc:
        logger.error('%s stopped: %s', name, exc)
        report.diagnostic = f'{type(exc).__name__}: {exc}'
    else:
        report.verdict = PASS if outcome.passed else FAIL
        report.stages = outcome.stages
        report.tables = outcome.tables
    report.wall_time = time.perf_counter() - started
    logger.info('%s finished: %s in %.2fs', name, report.verdict, report.wall_time)
    return report


def refinement_levels(nodes, levels):
    """N, 2N, ... in cells: every level keeps the nodes of the previous one."""
    return [(nodes - 1) * 2 ** level + 1 for level in range(levels)]


def convergence_slopes(errors):
    """log2 ratios of successive errors; None where an error is missing or zero."""
    slopes = []
    for coarse, fine in zip(errors, errors[1:]):
        if coarse and fine and coarse > 0 and fine > 0:
            slopes.append(math.log2(coarse / fine))
        else:
            slopes.append(None)
    return slopes


def sweep(cfg, levels, seed=None):
    """Rerun at N, 2N, ..., 2^(L-1) N and fit the log2 error ratios."""
    if levels is None or levels < 2:
        raise ConfigurationError(f'A refinement sweep needs at least 2 levels, got {levels}.')
    name = cfg['experiment']
    seed = _seed(cfg, seed)
    started = time.perf_counter()
    report = ExperimentReport(experiment=name, config=dict(cfg, refine=levels), seed=seed, verdict=ERROR,
                              created_at=datetime.now(timezone.utc).isoformat())
    rows, outcomes = [], []
    try:
        for nodes in tqdm(refinement_levels(cfg['nodes'], levels), desc=f'{name} sweep', unit='level'):
            outcome = _execute(cfg, seed, nodes=nodes)
            outcomes.append(outcome)
            span = cfg['r_max'] - cfg['r_min']
            rows.append({'nodes': nodes, 'h': span / (nodes - 1), 'error': outcome.error,
                         'passed': outcome.passed})
    except LabError as exc:
        logger.error('%s sweep stopped at level %d: %s', name, len(rows), exc)
        report.diagnostic = f'{type(exc).__name__}: {exc}'
        report.refinement = rows
        report.wall_time = time.perf_counter() - started
        return report

    slopes = convergence_slopes([row['error'] for row in rows])
    for row, slope in zip(rows[1:], slopes):
        row['slope'] = slope
    rows[0]['slope'] = None
    passed = all(outcome.passed for outcome in outcomes)
    if cfg.get('min_slope') is not None:
        final = slopes[-1]
        passed = passed and final is not None and final >= cfg['min_slope']
    report.verdict = PASS if passed else FAIL
    report.stages = outcomes[-1].stages
    report.tables = dict(outcomes[-1].tables, refinement=rows)
    report.refinement = rows
    report.wall_time = time.perf_counter() - started
    logger.info('%s sweep over %d levels: %s (slopes %s)', name, levels, report.verdict, slopes)
    return report
