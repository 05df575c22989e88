import difflib
import math

from django import forms

from .analysis.geometry import LEFT_KINDS, PROFILE_KINDS, RIGHT_KINDS, Domain, WarpingProfile, model_manifold
from .analysis.positivity import CATALOG
from .exceptions import GeometryError
from .harness.registry import EXPERIMENTS, TEST_FUNCTIONS

# Profiles reachable from a config file; custom samples are a library-only feature.
CONFIG_PROFILES = tuple(kind for kind in PROFILE_KINDS if kind != 'custom-samples')

NEEDS_FINITE_P = ('caccioppoli', 'regularity', 'liouville', 'subquadratic', 'pp')

DEFAULTS = {
    'growth': 1.0,
    'n': 3,
    'r_min': 0.0,
    'r_max': 10.0,
    'nodes': 2001,
    'p': 2.0,
    'lam': 1.0,
    'K': 4,
    'membership': 'lp',
    'function': 'default',
    'amplitude': 1.0,
    'shift': 1.1,
    'q': 2.0,
    'samples': 10,
    'resolvent_shift': 1.0,
    'rel_tol': 1e-12,
    'stability_tol': 0.05,
    'decay': 0.5,
    'delta_fit': 0.1,
    'liouville_tol': 1e-6,
    'dir': '',
}


class FloatListField(forms.Field):
    """List of floats from a TOML array or a comma separated string."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            value = [item for item in value.replace(';', ',').split(',') if item.strip()]
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError('Enter a list of numbers.')
        try:
            numbers = [float(item) for item in value]
        except (TypeError, ValueError):
            raise forms.ValidationError('Enter a list of numbers.')
        if not all(math.isfinite(x) for x in numbers):
            raise forms.ValidationError('List entries must be finite.')
        return numbers


class ExperimentConfigForm(forms.Form):
    experiment = forms.ChoiceField(choices=[(name, name) for name in EXPERIMENTS])

    # [manifold]
    profile = forms.CharField(required=False, max_length=40)
    growth = forms.FloatField(required=False)
    n = forms.IntegerField(required=False, min_value=1)
    r_min = forms.FloatField(required=False)
    r_max = forms.FloatField(required=False)
    nodes = forms.IntegerField(required=False, min_value=8)
    h = forms.FloatField(required=False)
    left_kind = forms.ChoiceField(required=False, choices=[('', 'auto')] + [(k, k) for k in LEFT_KINDS])
    right_kind = forms.ChoiceField(required=False, choices=[('', 'auto')] + [(k, k) for k in RIGHT_KINDS])

    # [analysis]
    p = forms.FloatField(required=False)
    ps = FloatListField(required=False)
    eps = forms.FloatField(required=False)
    lam = forms.FloatField(required=False)
    K = forms.IntegerField(required=False, min_value=2)
    eps0 = forms.FloatField(required=False)
    ks = FloatListField(required=False)
    eps_ladder = FloatListField(required=False)
    omega = FloatListField(required=False)
    omega1 = FloatListField(required=False)
    membership = forms.ChoiceField(required=False, choices=[('lp', 'lp'), ('subquadratic', 'subquadratic')])
    function = forms.ChoiceField(required=False, choices=[(name, name) for name in TEST_FUNCTIONS])
    amplitude = forms.FloatField(required=False)
    shift = forms.FloatField(required=False)
    entry = forms.ChoiceField(required=False, choices=[('', '')] + [(name, name) for name in CATALOG])
    q = forms.FloatField(required=False)
    center = forms.FloatField(required=False)
    half_width = forms.FloatField(required=False)
    samples = forms.IntegerField(required=False, min_value=1, max_value=1000)
    resolvent_shift = forms.FloatField(required=False)

    # [tolerances]
    tol = forms.FloatField(required=False, min_value=0)
    rel_tol = forms.FloatField(required=False, min_value=0)
    stability_tol = forms.FloatField(required=False, min_value=0)
    decay = forms.FloatField(required=False, min_value=0)
    delta_fit = forms.FloatField(required=False, min_value=0)
    liouville_tol = forms.FloatField(required=False, min_value=0)
    min_slope = forms.FloatField(required=False)

    # [output] and run controls
    dir = forms.CharField(required=False, max_length=500)
    seed = forms.IntegerField(required=False, min_value=0, max_value=2 ** 64 - 1)
    refine = forms.IntegerField(required=False)

    def clean_profile(self):
        profile = (self.cleaned_data.get('profile') or 'euclidean').strip()
        if profile not in CONFIG_PROFILES:
            close = difflib.get_close_matches(profile, CONFIG_PROFILES, n=1)
            hint = f' Did you mean "{close[0]}"?' if close else ''
            raise forms.ValidationError(
                f'Unknown profile "{profile}". Choose one of: {", ".join(CONFIG_PROFILES)}.{hint}'
            )
        return profile

    def clean_growth(self):
        growth = self.cleaned_data.get('growth')
        if growth is not None and growth <= 0:
            raise forms.ValidationError('Growth coefficient must be positive.')
        return growth

    def clean_h(self):
        h = self.cleaned_data.get('h')
        if h is not None and h <= 0:
            raise forms.ValidationError('Grid step must be positive.')
        return h

    def clean_p(self):
        p = self.cleaned_data.get('p')
        if p is not None and p < 1:
            raise forms.ValidationError('Exponent p must be at least 1.')
        return p

    def clean_ps(self):
        ps = self.cleaned_data.get('ps')
        if ps is not None and (not ps or min(ps) <= 1):
            raise forms.ValidationError('Every exponent in ps must exceed 1.')
        return ps

    def clean_ks(self):
        ks = self.cleaned_data.get('ks')
        if ks is not None and (not ks or min(ks) <= 0):
            raise forms.ValidationError('Cutoff radii must be positive.')
        return sorted(ks) if ks else ks

    def clean_eps_ladder(self):
        ladder = self.cleaned_data.get('eps_ladder')
        if ladder is not None and (not ladder or min(ladder) <= 0):
            raise forms.ValidationError('The eps ladder needs positive entries.')
        return ladder

    def clean_omega(self):
        return self._clean_interval('omega')

    def clean_omega1(self):
        return self._clean_interval('omega1')

    def _clean_interval(self, name):
        interval = self.cleaned_data.get(name)
        if interval is None:
            return None
        if len(interval) != 2 or not interval[0] < interval[1]:
            raise forms.ValidationError('Enter an interval as [a, b] with a < b.')
        return interval

    def clean_refine(self):
        refine = self.cleaned_data.get('refine')
        if refine is not None and refine < 2:
            raise forms.ValidationError('A refinement sweep needs at least 2 levels.')
        return refine

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        for key, value in DEFAULTS.items():
            if cleaned.get(key) in (None, ''):
                cleaned[key] = value
        for key in ('left_kind', 'right_kind', 'entry'):
            cleaned[key] = cleaned.get(key) or None

        if cleaned['h'] is not None:
            span = cleaned['r_max'] - cleaned['r_min']
            cleaned['nodes'] = max(8, int(round(span / cleaned['h'])) + 1)

        try:
            profile = WarpingProfile.preset(cleaned['profile'], cleaned['growth'])
            domain = Domain(cleaned['r_min'], cleaned['r_max'], cleaned['left_kind'], cleaned['right_kind'])
            manifold = model_manifold(profile, cleaned['n'], domain)
        except GeometryError as exc:
            raise forms.ValidationError(str(exc))
        cleaned['left_kind'] = manifold.left_kind
        cleaned['right_kind'] = manifold.right_kind

        experiment = cleaned['experiment']
        p, eps = cleaned['p'], cleaned['eps']
        if experiment in NEEDS_FINITE_P and not p > 1:
            self.add_error('p', f'{experiment} needs p > 1.')
        if eps is not None and not 0 < eps < p - 1:
            self.add_error('eps', f'eps must lie in (0, p - 1) = (0, {p - 1:g}).')
        if experiment == 'counterexample' and not cleaned['entry']:
            self.add_error('entry', f'counterexample needs an entry: {", ".join(CATALOG)}.')
        if cleaned['lam'] < 0 and experiment != 'spectral':
            self.add_error('lam', 'Negative potentials are only accepted by the spectral experiment.')
        for name in ('omega', 'omega1'):
            interval = cleaned.get(name)
            if interval and not (cleaned['r_min'] <= interval[0] and interval[1] <= cleaned['r_max']):
                self.add_error(name, f'{name} must lie inside [{cleaned["r_min"]:g}, {cleaned["r_max"]:g}].')
        if cleaned['ks'] and 2 * max(cleaned['ks']) > cleaned['r_max']:
            self.add_error('ks', 'Cutoff supports B_2k must fit inside r <= r_max.')
        return cleaned
