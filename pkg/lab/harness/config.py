"""
Experiment configuration files.

A config is a TOML document with the sections [manifold], [analysis],
[tolerances] and [output]; top-level keys (experiment, seed, refine) are
allowed as well. Sections are flattened into one mapping and validated by
ExperimentConfigForm before any computation starts.
"""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings

from ..exceptions import ConfigurationError
from ..forms import ExperimentConfigForm

logger = logging.getLogger(__name__)

SECTIONS = ('manifold', 'analysis', 'tolerances', 'output')


def load_config(path):
    """Read a TOML config file and flatten its sections."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'Config file {path} does not exist.')
    try:
        with path.open('rb') as handle:
            document = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f'Config file {path} is not valid TOML: {exc}') from exc
    return flatten(document)


def flatten(document):
    flat = {}
    for key, value in document.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ConfigurationError(f'Unknown config section [{key}]. Sections: {", ".join(SECTIONS)}.')
            for inner, item in value.items():
                if inner in flat:
                    raise ConfigurationError(f'Key "{inner}" is set twice.')
                flat[inner] = item
        else:
            if key in flat:
                raise ConfigurationError(f'Key "{key}" is set twice.')
            flat[key] = value
    return flat


def validate_config(data):
    """Cleaned config with every default filled in; ConfigurationError lists all problems."""
    form = ExperimentConfigForm(data=data)
    unknown = sorted(set(data) - set(form.fields))
    if unknown:
        raise ConfigurationError(f'Unknown config keys: {", ".join(unknown)}.')
    if not form.is_valid():
        problems = []
        for name, errors in form.errors.items():
            label = 'config' if name == '__all__' else name
            problems.extend(f'{label}: {error}' for error in errors)
        raise ConfigurationError('Invalid configuration. ' + ' '.join(problems))
    return form.cleaned_data


def resolve_output_dir(cli_out=None, cfg=None):
    """--out, then LAB_OUTPUT_DIR, then [output] dir, then BASE_DIR/reports."""
    for candidate in (cli_out, settings.LAB_OUTPUT_DIR, (cfg or {}).get('dir')):
        if candidate:
            return Path(candidate)
    return Path(settings.LAB_DEFAULT_OUTPUT_DIR)
