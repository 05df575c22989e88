"""
Experiment registry: each experiment takes the cleaned config and a seeded
generator and returns an Outcome (verdict, per-stage certificates, tables and
an optional refinement error for sweeps).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..analysis.geometry import Domain, GridFunction, WarpingProfile, make_model
from ..analysis.groundstate import (
    closed_form_ground_state, ground_state_for, local_ground_state, transport_certificates, verify_pw_identity,
)
from ..analysis.kato import brezis_kato_check, kato_via_appendix
from ..analysis.liouville import (
    caccioppoli_check, chain_rule_consistency, cutoff, default_radii, energy_decay_test, liouville_verdict,
    regularity_certificate, subquadratic_class_check,
)
from ..analysis.operators import (
    laplacian, pair_distributional, resolvent_positivity, schrodinger, solve_boundary_problem, spectral_bottom,
    weak_form_pair,
)
from ..analysis.positivity import counterexample_catalog, pp_experiment, resolvent_view
from ..analysis.smoothing import green_coordinate, monotone_smooth_approx, verify_approx_properties

logger = logging.getLogger(__name__)

EXPERIMENTS = {}


@dataclass
class Outcome:
    passed: bool
    stages: dict
    tables: dict = field(default_factory=dict)
    error: Optional[float] = None


def experiment(name):
    def register(fn):
        EXPERIMENTS[name] = fn
        return fn
    return register


def build_model(cfg, nodes=None, r_max=None):
    profile = WarpingProfile.preset(cfg['profile'], cfg['growth'])
    domain = Domain(cfg['r_min'], cfg['r_max'] if r_max is None else r_max, cfg['left_kind'], cfg['right_kind'])
    return make_model(profile, cfg['n'], domain, cfg['nodes'] if nodes is None else nodes)


def operator_for(m, grid, lam):
    return laplacian(m, grid) if lam == 0 else schrodinger(m, grid, lam)


# Input functions

def _sinhc(r):
    safe = np.where(r == 0, 1.0, r)
    return np.where(r == 0, 1.0, np.sinh(safe) / safe)


def kink(m, grid, cfg):
    """max(-1, -1/r): harmonic branches glued at r = 1."""
    with np.errstate(divide='ignore'):
        return GridFunction(grid, cfg['amplitude'] * np.maximum(-1.0, -1.0 / grid.nodes))


def sinh_shift(m, grid, cfg):
    return GridFunction(grid, cfg['amplitude'] * _sinhc(grid.nodes) - cfg['shift'])


def constant(m, grid, cfg):
    return GridFunction.constant(grid, cfg['amplitude'])


def green_hinge(m, grid, cfg, knee=None):
    """amplitude * max(0, T) with T affine in the Green coordinate, 0 at the knee and 1 at r_max."""
    knee = cfg['center'] if knee is None and cfg.get('center') is not None else knee
    knee = grid.r_min + 0.25 * (grid.r_max - grid.r_min) if knee is None else knee
    window = grid.window_between(knee, grid.r_max)
    t = green_coordinate(window).t
    values = np.zeros(grid.size)
    lo = window.offset - grid.offset
    values[lo:lo + window.size] = t / t[-1]
    return GridFunction(grid, cfg['amplitude'] * values)


def ground_shift(m, grid, cfg):
    """amplitude * alpha - shift, alpha the discrete ground state of Delta - lam: L u = lam * shift >= 0."""
    alpha = ground_state_for(m, grid, cfg['lam']).alpha.values
    return GridFunction(grid, cfg['amplitude'] * alpha - cfg['shift'])


def resolvent_input(m, grid, cfg):
    """Solution of (-Delta + 1) u = amplitude * exp(-r^2)."""
    L = schrodinger(m, grid, 1.0)
    left = 0.0 if L.left_tag == 'dirichlet' else None
    right = 0.0 if L.right_tag == 'dirichlet' else None
    source = cfg['amplitude'] * np.exp(-grid.nodes ** 2)
    return solve_boundary_problem(L, None, source=-source, left=left, right=right)


TEST_FUNCTIONS = {
    'default': None,
    'kink': kink,
    'sinh-shift': sinh_shift,
    'constant': constant,
    'hinge': green_hinge,
    'ground-shift': ground_shift,
    'resolvent': resolvent_input,
}


def input_function(m, grid, cfg, default):
    name = cfg['function'] if cfg['function'] != 'default' else default
    return TEST_FUNCTIONS[name](m, grid, cfg)


def pointwise_residual(m, grid, lam):
    """
    Relative strong residual of a closed-form solution of Delta alpha = lam alpha on the middle half of the grid.

    None when no closed form is known for the profile.
    """
    alpha_fn = closed_form_ground_state(m.profile.kind, m.n, lam)
    if alpha_fn is None or lam == 0:
        return None
    A = operator_for(m, grid, lam)
    alpha = alpha_fn(grid.nodes)
    strong = A.stiffness(alpha) / A.volumes - A.lam * alpha
    span = grid.r_max - grid.r_min
    mask = (grid.nodes >= grid.r_min + 0.25 * span) & (grid.nodes <= grid.r_max - 0.25 * span)
    return float(np.max(np.abs(strong[mask])) / np.max(np.abs(alpha[mask])))


def _random_test_function(grid, rng):
    values = rng.random(grid.size) * np.sin(np.linspace(0.0, np.pi, grid.size))
    values[0] = values[-1] = 0.0
    return GridFunction(grid, values)


def _default_omega(grid, cfg):
    if cfg.get('omega'):
        return tuple(cfg['omega'])
    if grid.has_pole:
        return (grid.r_max / 8.0, grid.r_max)
    return (grid.r_min, grid.r_max)


@experiment('pw-identity')
def pw_identity(cfg, rng, m, grid):
    lam = cfg['lam']
    gs = ground_state_for(m, grid, lam)
    rows = []
    for sample in range(cfg['samples']):
        phi = _random_test_function(grid, rng)
        residual = verify_pw_identity(gs, phi, v=rng.random(grid.size))
        rows.append({'sample': sample, **residual.as_dict(),
                     'passed': residual.adjoint <= cfg['rel_tol'] * max(residual.scale, 1.0)})

    transport = []
    alpha = gs.alpha.values
    for sample in range(cfg['samples']):
        a, b = rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0) * float(alpha.max())
        sign = 1.0 if sample % 2 == 0 else -1.0
        # with lam = 0 the transported inputs are harmonic for either sign
        expected = sign > 0 or lam == 0
        u = GridFunction(grid, sign * (a * alpha - b))
        plain, weighted = transport_certificates(u, gs)
        transport.append({'sample': sample, 'plain_passed': plain.passed, 'weighted_passed': weighted.passed,
                          'plain_min': plain.min_pairing, 'weighted_min': weighted.min_pairing,
                          'expected': expected, 'agree': plain.passed == weighted.passed == expected})

    error = pointwise_residual(m, grid, lam)
    passed = all(row['passed'] for row in rows) and all(row['agree'] for row in transport)
    stages = {
        'ground_state': {'equation_residual': gs.equation_residual(), 'min_alpha': float(alpha.min())},
        'adjoint_max': max(row['adjoint'] for row in rows),
        'strong_max': max(row['strong'] for row in rows),
        'pointwise_residual': error,
    }
    return Outcome(passed=passed, stages=stages, tables={'residuals': rows, 'transport': transport}, error=error)


@experiment('smoothing-abc')
def smoothing_abc(cfg, rng, m, grid):
    u = input_function(m, grid, cfg, 'kink')
    A = laplacian(m, grid)
    seq = monotone_smooth_approx(u, A, _default_omega(grid, cfg), K=cfg['K'], eps0=cfg.get('eps0'), tol=cfg.get('tol'))
    report = verify_approx_properties(seq, rel_tol=cfg['rel_tol'])
    stages = {
        'inner_domain': [seq.inner.r_min, seq.inner.r_max],
        'eps0': seq.eps0,
        'clamped_mass': seq.clamped_mass,
        'input_certificate': seq.input_certificate.as_dict(),
        'properties': report.as_dict(),
    }
    sups = [{'k': k, 'eps': eps, 'sup_difference': sup}
            for k, (eps, sup) in enumerate(zip(seq.radii, report.sup_differences), start=1)]
    return Outcome(passed=report.passed, stages=stages, tables={'l1': report.l1_table, 'sup': sups})


@experiment('brezis-kato')
def brezis_kato(cfg, rng, m, grid):
    lam = cfg['lam']
    u = input_function(m, grid, cfg, 'sinh-shift')
    omega = tuple(cfg['omega']) if cfg.get('omega') else None
    regularization = brezis_kato_check(u, lam, omega, cfg.get('eps_ladder'))
    appendix = kato_via_appendix(u, lam, omega, K=cfg['K'], eps0=cfg.get('eps0'))

    envelope_ok = all(row['sup_deviation'] <= 1.1 * row['deviation_bound'] and row['max_h_prime'] <= 1.0
                      for row in regularization.ladder)
    randomized = []
    alpha = ground_state_for(m, grid, lam).alpha.values if lam > 0 else None
    if alpha is not None:
        for sample in range(cfg['samples']):
            a = rng.uniform(0.5, 2.0)
            b = rng.uniform(a * alpha.min(), a * alpha.max())
            v = GridFunction(grid, a * alpha - b)
            first = brezis_kato_check(v, lam)
            second = kato_via_appendix(v, lam, K=cfg['K'])
            randomized.append({'sample': sample, 'a': a, 'b': b, 'regularization': first.passed,
                               'appendix': second.passed,
                               'agree': second.extras['agreement']['same_verdict']})
    agreement = appendix.extras['agreement']
    passed = (regularization.passed and appendix.passed and agreement['same_verdict'] and envelope_ok
              and all(row['regularization'] and row['appendix'] for row in randomized))
    stages = {
        'regularization': regularization.as_dict(),
        'appendix': appendix.as_dict(),
        'envelope_ok': envelope_ok,
    }
    return Outcome(passed=passed, stages=stages,
                   tables={'ladder': regularization.ladder, 'appendix': appendix.ladder, 'randomized': randomized})


@experiment('caccioppoli')
def caccioppoli(cfg, rng, m, grid):
    rows = []
    span = grid.r_max - grid.r_min
    for sample in range(cfg['samples']):
        p = cfg['ps'][sample % len(cfg['ps'])] if cfg.get('ps') else rng.uniform(1.1, 4.0)
        eps = cfg['eps'] if cfg.get('eps') and cfg['eps'] < p - 1 else rng.uniform(0.05, 0.95) * (p - 1.0)
        k = rng.uniform(0.1, 0.5) * grid.r_max
        knee = grid.r_min + rng.uniform(0.05, 0.5) * span
        delta = rng.uniform(0.01, 1.0)
        hinge = green_hinge(m, grid, {'amplitude': rng.uniform(0.1, 2.0)}, knee=knee)
        u = hinge.shifted(delta)
        result = caccioppoli_check(u, p, eps, cutoff(grid, k))
        rows.append({'sample': sample, 'p': p, 'eps': eps, 'k': k, 'knee': knee, 'delta': delta,
                     **result.as_dict()})
    failures = sum(not row['passed'] for row in rows)
    return Outcome(passed=failures == 0, stages={'samples': len(rows), 'failures': failures},
                   tables={'caccioppoli': rows})


def _thirds_in_t(grid, omega):
    """Radii at one and two thirds of the Green-coordinate length of omega."""
    window = grid.window_between(*omega)
    t = green_coordinate(window).t
    targets = t[0] + np.array([1.0, 2.0]) / 3.0 * (t[-1] - t[0])
    return tuple(float(x) for x in np.interp(targets, t, window.nodes))


@experiment('regularity')
def regularity(cfg, rng, m, grid):
    u = input_function(m, grid, cfg, 'hinge')
    omega = _default_omega(grid, cfg)
    omega1 = tuple(cfg['omega1']) if cfg.get('omega1') else _thirds_in_t(grid, omega)
    ps = cfg.get('ps') or [1.1, 1.5, 2.0, 3.0]
    rows, reports = [], {}
    for p in ps:
        report = regularity_certificate(u, p, omega, omega1, K=cfg['K'], eps0=cfg.get('eps0'))
        reports[str(p)] = report.as_dict()
        for row in report.seminorms:
            rows.append({'p': p, 'eps': report.eps, 'k': row['k'], 'squared': row['squared'],
                         'bound': report.bound, 'passed': report.passed})
    passed = all(item['passed'] for item in reports.values())
    return Outcome(passed=passed, stages={'omega': list(omega), 'omega1': list(omega1), 'reports': reports},
                   tables={'regularity': rows})


def _liouville_inputs(cfg, m, grid):
    u = input_function(m, grid, cfg, 'constant')
    ks = cfg.get('ks') or default_radii(grid)
    return u, ks


@experiment('liouville')
def liouville(cfg, rng, m, grid):
    p = cfg['p']
    u, ks = _liouville_inputs(cfg, m, grid)
    verdict = liouville_verdict(u, p, m, ks, cfg['membership'], decay=cfg['decay'], tol=cfg['liouville_tol'],
                                stability_tol=cfg['stability_tol'], delta_fit=cfg['delta_fit'])

    # same step, half the truncation radius
    half_nodes = (grid.size - 1) // 2 + 1
    half_m, half_grid = build_model(cfg, nodes=half_nodes, r_max=grid.r_min + (grid.r_max - grid.r_min) / 2.0)
    u_half = input_function(half_m, half_grid, cfg, 'constant')
    common = [k for k in ks if 2 * k <= half_grid.r_max] or default_radii(half_grid)
    full_table = energy_decay_test(u, p, common, stability_tol=cfg['stability_tol'])
    half_table = energy_decay_test(u_half, p, common, stability_tol=cfg['stability_tol'])
    stabilization = []
    for full, half in zip(full_table.rows, half_table.rows):
        change = max(_relative(full['lhs'], half['lhs']), _relative(full['rhs'], half['rhs']))
        stabilization.append({'k': full['k'], 'lhs_full': full['lhs'], 'lhs_half': half['lhs'],
                              'rhs_full': full['rhs'], 'rhs_half': half['rhs'], 'relative_change': change,
                              'agree': change <= cfg['stability_tol']})
    stable = all(row['agree'] for row in stabilization)
    tables = {'stabilization': stabilization}
    if verdict.table is not None:
        tables['energy'] = verdict.table.rows
    return Outcome(passed=verdict.verdict == 'constant' and stable,
                   stages={'verdict': verdict.as_dict(), 'stable_under_truncation': stable}, tables=tables)


def _relative(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


@experiment('subquadratic')
def subquadratic(cfg, rng, m, grid):
    p = cfg['p']
    u = input_function(m, grid, cfg, 'constant')
    ks = cfg.get('ks') or default_radii(grid)
    result = subquadratic_class_check(u, p, ks, cfg['delta_fit'])
    verdict = liouville_verdict(u, p, m, ks, 'subquadratic', decay=cfg['decay'], tol=cfg['liouville_tol'],
                                stability_tol=cfg['stability_tol'], delta_fit=cfg['delta_fit'])
    masses = [{'k': k, 'annulus_mass': mass} for k, mass in zip(sorted(ks), result.masses)]
    return Outcome(passed=result.member and verdict.verdict == 'constant',
                   stages={'class': result.as_dict(), 'verdict': verdict.as_dict()}, tables={'masses': masses})


@experiment('pp')
def positivity_preserving(cfg, rng, m, grid):
    u = input_function(m, grid, cfg, 'resolvent')
    verdict = pp_experiment(u, cfg['p'], m, description=f'{m.profile.kind} n={m.n}',
                            membership=cfg['membership'], stability_tol=cfg['stability_tol'])
    tables = {}
    if verdict.liouville.table is not None:
        tables['energy'] = verdict.liouville.table.rows
    return Outcome(passed=verdict.conclusion == 'nonnegative', stages=verdict.as_dict(), tables=tables)


@experiment('counterexample')
def counterexample(cfg, rng, m, grid):
    entry = counterexample_catalog(cfg['entry'])
    tables = {}
    if 'threshold_scan' in entry.report:
        tables['threshold'] = entry.report['threshold_scan']
    if 'probes' in entry.report:
        tables['probes'] = [
            {'radius': r, 'raw': raw, 'extrapolated': limit}
            for r, raw, limit in zip(entry.report['probes'], entry.report['raw_values'],
                                     entry.report['extrapolated_limits'])
        ]
    return Outcome(passed=entry.passed, stages=entry.as_dict(), tables=tables)


@experiment('resolvent')
def resolvent(cfg, rng, m, grid):
    sources = []
    for _ in range(cfg['samples']):
        center = rng.uniform(grid.r_min, grid.r_max)
        width = rng.uniform(0.05, 0.5) * (grid.r_max - grid.r_min)
        sources.append(rng.uniform(0.1, 2.0) * np.exp(-((grid.nodes - center) / width) ** 2))
    view = resolvent_view(m, grid, cfg['p'], sources)
    shifted = resolvent_positivity(m, grid, cfg['resolvent_shift'])
    return Outcome(passed=view.passed and shifted.passed,
                   stages={'view': view.as_dict(), 'shifted': shifted.as_dict()}, tables={'sources': view.rows})


@experiment('consistency')
def consistency(cfg, rng, m, grid):
    A = operator_for(m, grid, cfg['lam'])
    rows = []
    for sample in range(cfg['samples']):
        u = GridFunction(grid, rng.standard_normal(grid.size))
        phi = _random_test_function(grid, rng)
        distributional = pair_distributional(u, phi, A)
        weak = weak_form_pair(u, phi, A)
        stiff = A.stiffness(phi.values)
        scale = float(np.sum(np.abs(u.values * stiff)) + np.sum(np.abs(A.lam * u.values * phi.values * A.measure)))
        gap = abs(distributional - weak)
        rows.append({'sample': sample, 'distributional': distributional, 'weak': weak, 'gap': gap,
                     'scale': scale, 'passed': gap <= cfg['rel_tol'] * max(scale, 1.0)})
    chain = chain_rule_consistency(GridFunction(grid, 1.0 + grid.nodes ** 2 / (1.0 + grid.r_max ** 2)), cfg['q'])
    error = pointwise_residual(m, grid, cfg['lam'])
    passed = all(row['passed'] for row in rows)
    return Outcome(passed=passed, stages={'pointwise_residual': error, 'chain_rule': chain.as_dict()},
                   tables={'green_identity': rows}, error=error)


@experiment('spectral')
def spectral(cfg, rng, m, grid):
    L = laplacian(m, grid)
    lam = cfg['lam']
    span = grid.r_max - grid.r_min
    rows = []
    for fraction in (1.0, 0.75, 0.5, 0.25):
        domain = (grid.r_min, grid.r_min + fraction * span)
        rows.append({'fraction': fraction, 'r_max': domain[1], 'bottom': spectral_bottom(L, domain, potential=lam)})
    bottoms = [row['bottom'] for row in rows]
    monotone = all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(bottoms, bottoms[1:]))
    stages = {'bottoms': rows, 'domain_monotone': monotone}
    error = None
    if m.profile.kind == 'flat':
        oracle = (math.pi / span) ** 2 + lam
        error = abs(bottoms[0] - oracle)
        stages['oracle'] = oracle
    passed = monotone
    if lam < 0:
        center = cfg['center'] if cfg.get('center') is not None else grid.r_min + 0.5 * span
        half_width = cfg['half_width'] or 0.5 * span
        state, bottom = local_ground_state(L, lam, center, half_width)
        stages['local_ground_state'] = {'window': [state.grid.r_min, state.grid.r_max], 'bottom': bottom,
                                        'min_alpha': float(state.alpha.values.min()),
                                        'residual': state.equation_residual()}
        passed = passed and bottom > 0
    return Outcome(passed=passed, stages=stages, tables={'spectral': rows}, error=error)
