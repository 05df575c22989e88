"""
Report and table emission: one JSON document per run, one CSV per table.
"""
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def plain(value):
    """JSON-ready copy of value: numpy scalars unwrapped, non-finite floats spelled out."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [plain(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')
    if isinstance(value, Path):
        return str(value)
    return value


def report_json(report):
    return json.dumps(plain(report.as_dict()), indent=2, sort_keys=True)


def write_report(report, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f'{report.slug}.json'
    path.write_text(report_json(report) + '\n', encoding='utf-8')
    logger.info('Report written to %s', path)
    return path


def table_columns(rows):
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return columns


def write_table(rows, path):
    """CSV with a one-line header; nested values are stored as JSON."""
    columns = table_columns(rows)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            cells = []
            for column in columns:
                value = plain(row.get(column))
                cells.append(json.dumps(value) if isinstance(value, (dict, list)) else
                             ('' if value is None else value))
            writer.writerow(cells)
    return path


def write_tables(report, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in sorted(report.tables.items()):
        if not rows:
            continue
        paths.append(write_table(rows, out_dir / f'{report.slug}-{name}.csv'))
    if paths:
        logger.info('%d tables written to %s', len(paths), out_dir)
    return paths
