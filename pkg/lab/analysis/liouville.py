"""
Caccioppoli energy estimates and L^p Liouville tests for nonnegative subharmonic functions.

Discrete energies live on cells: |D v|^2 is weighted by the half-node
conduction w, cutoffs and powers of u by their cell averages.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..exceptions import IncompleteModelError, PreconditionError
from .geometry import GridFunction, annulus_norm
from .operators import check_subsolution, laplacian, lp_norm, w12_seminorm
from .smoothing import monotone_smooth_approx

logger = logging.getLogger(__name__)

DEFAULT_STABILITY_TOL = 0.05
DEFAULT_DECAY = 0.5
DEFAULT_DELTA_FIT = 0.1


def caccioppoli_constant(p, eps):
    """4 eps (p - 1 - eps) / p^2."""
    _check_exponent(p)
    if not 0 < eps < p - 1:
        raise PreconditionError(f'Caccioppoli parameter must satisfy 0 < eps < p - 1 = {p - 1}, got {eps}.')
    return 4.0 * eps * (p - 1.0 - eps) / p ** 2


def _check_exponent(p):
    if not 1 < p < math.inf:
        raise PreconditionError(f'Exponent must satisfy 1 < p < inf, got {p}.')


@dataclass(frozen=True, eq=False)
class CutoffFamily:
    grid: object
    radii: List[float]
    functions: List[GridFunction]
    slopes: List[float]

    def __getitem__(self, index):
        return self.functions[index]

    def __len__(self):
        return len(self.functions)


def cutoff(grid, k):
    """1 on B_k, 2 - r/k on [k, 2k], 0 beyond."""
    return GridFunction(grid, np.clip(2.0 - grid.nodes / k, 0.0, 1.0))


def cutoff_family(grid, ks):
    ks = [float(k) for k in ks]
    if not ks or min(ks) <= 0:
        raise PreconditionError('Cutoff radii must be positive.')
    if 2 * max(ks) > grid.r_max + 1e-9 * grid.h:
        raise PreconditionError(f'Cutoff support B_{2 * max(ks):g} leaves the truncated domain r <= {grid.r_max:g}.')
    functions, slopes = [], []
    for k in ks:
        phi = cutoff(grid, k)
        slope = float(np.max(np.abs(np.diff(phi.values))) / grid.h)
        if slope > 2.0 / k * (1 + 1e-12):
            raise PreconditionError(f'Cutoff at k = {k:g} is steeper than 2/k.')
        functions.append(phi)
        slopes.append(slope)
    return CutoffFamily(grid=grid, radii=ks, functions=functions, slopes=slopes)


def _cell_mean(values):
    return 0.5 * (values[:-1] + values[1:])


def _ball_cells(grid, k):
    """Indicator of the cells inside B_k."""
    _, hi = grid.index_range(grid.r_min, k)
    inside = np.zeros(grid.size - 1)
    inside[:hi] = 1.0
    return inside


def gradient_energy(v, grid, weight=None):
    """sum over cells of weight * w * (Dv)^2 * h."""
    dv = np.diff(v) / grid.h
    cells = grid.w_half * dv ** 2 * grid.h
    return float(np.sum(cells if weight is None else weight * cells))


@dataclass(frozen=True)
class CaccioppoliResult:
    lhs: float
    rhs: float
    constant: float
    tolerance: float
    passed: bool

    @property
    def slack(self):
        return self.rhs - self.lhs

    def as_dict(self):
        return {
            'lhs': self.lhs,
            'rhs': self.rhs,
            'constant': self.constant,
            'tolerance': self.tolerance,
            'slack': self.slack,
            'passed': self.passed,
        }


def _require_subharmonic(u, region=None):
    A = laplacian(u.grid.manifold, u.grid)
    certificate = check_subsolution(u, A, region)
    if not certificate.passed:
        raise PreconditionError(
            f'u is not subharmonic (pairing {certificate.min_pairing:.3e} at r = {certificate.worst_radius:.4g}).'
        )
    return certificate


def caccioppoli_check(u, p, eps, phi, check_input=True):
    """
    c_{p,eps} sum phi^2 w |D u^{p/2}|^2 h <= sum u^p |D phi|^2 w h, cell averages for phi^2 and u^p.
    """
    constant = caccioppoli_constant(p, eps)
    if np.min(u.values) <= 0:
        raise PreconditionError('Caccioppoli needs u > 0; shift by delta first.')
    if check_input:
        _require_subharmonic(u)
    grid = u.grid
    phi_values = phi.values if isinstance(phi, GridFunction) else np.asarray(phi, dtype=float)
    half_power = u.values ** (p / 2.0)
    lhs = constant * gradient_energy(half_power, grid, weight=_cell_mean(phi_values ** 2))
    rhs = gradient_energy(phi_values, grid, weight=_cell_mean(u.values ** p))
    tol = 10.0 * grid.h ** 2 * (lhs + rhs) + 1e-300
    return CaccioppoliResult(lhs=lhs, rhs=rhs, constant=constant, tolerance=tol, passed=bool(lhs <= rhs + tol))


@dataclass
class RegularityReport:
    p: float
    eps: float
    seminorms: list
    bound: float
    gradient_cutoff: float
    sup_first: float
    passed: bool
    inner_domain: list

    def as_dict(self):
        return {
            'p': self.p,
            'eps': self.eps,
            'seminorms': self.seminorms,
            'bound': self.bound,
            'gradient_cutoff': self.gradient_cutoff,
            'sup_first': self.sup_first,
            'passed': self.passed,
            'inner_domain': self.inner_domain,
        }


def regularity_certificate(u, p, omega, omega1, K=4, eps=None, eps0=None):
    """
    Uniform W^{1,2} bound of (u_k + 1/k)^{p/2} on omega1 along the smooth approximation.

    bound = p^2 |grad phi|^2 / (4 eps (p - 1 - eps)) * int_{omega'} (u_1 + 1)^p,
    phi the piecewise linear cutoff equal to 1 on omega1 and 0 at the ends of omega'.
    """
    _check_exponent(p)
    eps = (p - 1.0) / 2.0 if eps is None else eps
    constant = caccioppoli_constant(p, eps)
    if np.min(u.values) < 0:
        raise PreconditionError('Regularity certificate is stated for u >= 0.')
    A = laplacian(u.grid.manifold, u.grid)
    seq = monotone_smooth_approx(u, A, omega, K=K, eps0=eps0)
    inner = seq.inner
    a1, b1 = omega1
    if not (inner.r_min < a1 < b1 < inner.r_max):
        raise PreconditionError(
            f'Inner domain [{a1:g}, {b1:g}] must sit strictly inside the smoothing domain '
            f'[{inner.r_min:g}, {inner.r_max:g}].'
        )
    lo1, hi1 = inner.index_range(a1, b1)
    gradient = max(1.0 / (a1 - inner.r_min), 1.0 / (inner.r_max - b1))

    first = seq.iterates[0].values + 1.0
    mass = float(np.sum(first ** p * inner.mu))
    bound = gradient ** 2 * mass / constant

    seminorms = []
    for k, iterate in enumerate(seq.iterates, start=1):
        shifted = GridFunction(inner, (iterate.values + 1.0 / k) ** (p / 2.0))
        seminorm = w12_seminorm(shifted, (inner.nodes[lo1], inner.nodes[hi1]))
        seminorms.append({'k': k, 'seminorm': seminorm, 'squared': seminorm ** 2})
    tolerance = 10.0 * inner.h ** 2 * bound
    passed = all(row['squared'] <= bound + tolerance for row in seminorms) and math.isfinite(bound)
    return RegularityReport(
        p=p, eps=eps, seminorms=seminorms, bound=bound, gradient_cutoff=gradient,
        sup_first=float(np.max(first[lo1:hi1 + 1])), passed=passed,
        inner_domain=[inner.r_min, inner.r_max],
    )


@dataclass(frozen=True)
class LpMembership:
    member: bool
    norm_half: float
    norm_full: float
    relative_change: float

    def as_dict(self):
        return {
            'member': self.member,
            'norm_half': self.norm_half,
            'norm_full': self.norm_full,
            'relative_change': self.relative_change,
        }


def lp_membership(u, p, stability_tol=DEFAULT_STABILITY_TOL):
    """Stabilization of ||u||_p^p between truncation at r_max / 2 and r_max."""
    grid = u.grid
    half = lp_norm(u, p, (grid.r_min, 0.5 * (grid.r_min + grid.r_max)))
    full = lp_norm(u, p)
    if full == 0:
        return LpMembership(member=True, norm_half=0.0, norm_full=0.0, relative_change=0.0)
    change = (full ** p - half ** p) / full ** p
    return LpMembership(member=bool(change <= stability_tol), norm_half=half, norm_full=full,
                        relative_change=float(change))


@dataclass
class EnergyTable:
    p: float
    eps: float
    rows: list
    decay_exponent: float
    in_lp: Optional[LpMembership] = None

    @property
    def dominated(self):
        return all(row['passed'] for row in self.rows)

    def as_dict(self):
        return {
            'p': self.p,
            'eps': self.eps,
            'rows': self.rows,
            'decay_exponent': self.decay_exponent,
            'dominated': self.dominated,
            'in_lp': self.in_lp.as_dict() if self.in_lp else None,
        }


def fit_exponent(ks, values):
    """Slope of log values against log k over the positive entries; -inf when all vanish."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    positive = values > 0
    if not positive.any():
        return -math.inf
    if positive.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(ks[positive]), np.log(values[positive]), 1)
    return float(slope)


def energy_decay_test(u, p, ks, eps=None, stability_tol=DEFAULT_STABILITY_TOL):
    """
    Rows (k, lhs, rhs): lhs = c_{p,eps} int_{B_k} |grad u^{p/2}|^2, rhs = (4 / k^2) int_{B_2k \\ B_k} u^p.

    rhs_cutoff is the discrete Caccioppoli right side with the actual cutoff phi_k.
    """
    _check_exponent(p)
    eps = (p - 1.0) / 2.0 if eps is None else eps
    constant = caccioppoli_constant(p, eps)
    if np.min(u.values) < 0:
        raise PreconditionError('Energy decay test is stated for u >= 0.')
    _require_subharmonic(u)
    grid = u.grid
    family = cutoff_family(grid, ks)
    half_power = u.values ** (p / 2.0)
    rows = []
    for k, phi, slope in zip(family.radii, family.functions, family.slopes):
        lhs = constant * gradient_energy(half_power, grid, weight=_ball_cells(grid, k))
        annulus_mass = annulus_norm(u, p, k) ** p
        rhs = 4.0 / k ** 2 * annulus_mass
        rhs_cutoff = gradient_energy(phi.values, grid, weight=_cell_mean(u.values ** p))
        tol = 10.0 * grid.h ** 2 * (lhs + rhs) + 1e-300
        rows.append({
            'k': k,
            'lhs': lhs,
            'rhs': rhs,
            'rhs_cutoff': rhs_cutoff,
            'cutoff_slope': slope,
            'annulus_mass': annulus_mass,
            'passed': bool(lhs <= rhs + tol and lhs <= rhs_cutoff + tol),
        })
    exponent = fit_exponent(family.radii, [row['rhs'] for row in rows])
    return EnergyTable(p=p, eps=eps, rows=rows, decay_exponent=exponent,
                       in_lp=lp_membership(u, p, stability_tol))


@dataclass(frozen=True)
class SubquadraticResult:
    exponent: float
    member: bool
    delta_fit: float
    masses: tuple

    def as_dict(self):
        return {
            'exponent': self.exponent,
            'member': self.member,
            'delta_fit': self.delta_fit,
            'masses': list(self.masses),
        }


def subquadratic_class_check(u, p, ks, delta_fit=DEFAULT_DELTA_FIT):
    """Growth exponent of the annulus masses ||u||^p_{L^p(B_2k \\ B_k)}; member iff < 2 - delta_fit."""
    ks = sorted(float(k) for k in ks)
    if len(ks) < 4 or ks[-1] < 4 * ks[0]:
        raise PreconditionError('Class check needs at least 4 radii spanning a dyadic range (k_max >= 4 k_min).')
    masses = tuple(annulus_norm(u, p, k) ** p for k in ks)
    exponent = fit_exponent(ks, masses)
    if exponent == -math.inf:
        return SubquadraticResult(exponent=exponent, member=True, delta_fit=delta_fit, masses=masses)
    member = bool(math.isfinite(exponent) and exponent < 2.0 - delta_fit)
    return SubquadraticResult(exponent=exponent, member=member, delta_fit=delta_fit, masses=masses)


@dataclass
class LiouvilleVerdict:
    verdict: str
    reason: str
    p: float
    table: Optional[EnergyTable] = None
    membership: dict = field(default_factory=dict)
    energy: Optional[float] = None
    oscillation: Optional[float] = None
    poincare_bound: Optional[float] = None
    oscillation_bound: Optional[float] = None
    tolerance: Optional[float] = None

    def as_dict(self):
        return {
            'verdict': self.verdict,
            'reason': self.reason,
            'p': self.p,
            'table': self.table.as_dict() if self.table else None,
            'membership': self.membership,
            'energy': self.energy,
            'oscillation': self.oscillation,
            'poincare_bound': self.poincare_bound,
            'oscillation_bound': self.oscillation_bound,
            'tolerance': self.tolerance,
        }


def default_radii(grid, count=4):
    """Dyadic radii r_max / 2, r_max / 4, ... in increasing order."""
    return sorted(grid.r_max / 2.0 ** j for j in range(1, count + 1))


def liouville_verdict(u, p, m=None, ks=None, membership='lp', decay=DEFAULT_DECAY, tol=1e-6,
                      stability_tol=DEFAULT_STABILITY_TOL, delta_fit=DEFAULT_DELTA_FIT):
    """
    constant / nonconstant-witness / not-applicable for u >= 0 subharmonic on a complete model.

    membership 'lp' asks for L^p stabilization, 'subquadratic' for annulus growth o(k^2).
    """
    grid = u.grid
    m = grid.manifold if m is None else m
    if p == math.inf:
        return LiouvilleVerdict(verdict='not-applicable', reason='p must be finite for the energy argument.', p=p)
    _check_exponent(p)
    if not m.is_complete:
        raise IncompleteModelError(
            f'Liouville test needs a complete model (pole + truncation); got {m.left_kind}/{m.right_kind}. '
            'See the counterexample catalog for incomplete models.'
        )
    if membership not in ('lp', 'subquadratic'):
        raise PreconditionError(f'Unknown membership test "{membership}".')
    scale = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    if np.min(u.values) < -tol * (1.0 + scale):
        return LiouvilleVerdict(verdict='not-applicable', reason='u takes negative values.', p=p)
    u = GridFunction(grid, np.maximum(u.values, 0.0))
    certificate = check_subsolution(u, laplacian(m, grid))
    if not certificate.passed:
        return LiouvilleVerdict(verdict='not-applicable', reason='u is not certified subharmonic.', p=p,
                                membership={'certificate': certificate.as_dict()})

    ks = default_radii(grid) if ks is None else ks
    lp = lp_membership(u, p, stability_tol)
    info = {'lp': lp.as_dict()}
    if membership == 'subquadratic':
        cls = subquadratic_class_check(u, p, ks, delta_fit)
        info['subquadratic'] = cls.as_dict()
        member, why = cls.member, 'annulus growth is not o(k^2)'
    else:
        member, why = lp.member, 'u is not in L^p (norm grows with the truncation radius)'
    if not member:
        return LiouvilleVerdict(verdict='not-applicable', reason=why, p=p, membership=info)

    table = energy_decay_test(u, p, ks, stability_tol=stability_tol)
    if not table.decay_exponent <= -decay:
        return LiouvilleVerdict(verdict='not-applicable', reason='rhs column does not decay along k.', p=p,
                                table=table, membership=info)

    k_max = max(ks)
    _, hi = grid.index_range(grid.r_min, k_max)
    half_power = u.values ** (p / 2.0)
    energy = gradient_energy(half_power, grid, weight=_ball_cells(grid, k_max))
    oscillation = float(np.ptp(u.values[:hi + 1]))
    first = 1 if grid.has_pole else 0
    t_length = float(np.sum(grid.h / grid.w_half[first:hi]))
    poincare = math.sqrt(energy) * math.sqrt(t_length)
    volume = grid.volume()
    energy_tol = tol * (1.0 + scale ** p * volume)
    # discrete Poincare in t: osc(u on B_k) <= sqrt(rhs_k) diam_t(B_k)
    rhs_k = max(table.rows, key=lambda row: row['k'])['rhs']
    oscillation_bound = math.sqrt(rhs_k) * t_length + tol * (1.0 + scale)
    verdict = 'constant' if energy <= energy_tol and oscillation <= oscillation_bound else 'nonconstant-witness'
    logger.debug('Liouville p=%g: energy %.3e, oscillation %.3e -> %s', p, energy, oscillation, verdict)
    return LiouvilleVerdict(
        verdict=verdict,
        reason='rhs decays along k' if verdict == 'constant' else 'energy or oscillation above tolerance',
        p=p, table=table, membership=info, energy=energy, oscillation=oscillation,
        poincare_bound=poincare, oscillation_bound=oscillation_bound, tolerance=energy_tol,
    )


@dataclass(frozen=True)
class ChainRuleResult:
    deviation: float
    coarse_deviation: float
    slope: Optional[float]

    def as_dict(self):
        return {'deviation': self.deviation, 'coarse_deviation': self.coarse_deviation, 'slope': self.slope}


def _chain_deviation(values, h, q):
    dq = np.diff(values ** q) / h
    mid = _cell_mean(values)
    return float(np.max(np.abs(dq - q * mid ** (q - 1.0) * np.diff(values) / h)))


def chain_rule_consistency(u, q):
    """max |D(u^q) - q (mid u)^{q-1} Du| over cells, with the slope against the every-other-node grid."""
    if not q > 0:
        raise PreconditionError(f'Chain rule exponent must be positive, got {q}.')
    if np.min(u.values) <= 0:
        raise PreconditionError('Chain rule check needs u bounded away from 0.')
    h = u.grid.h
    fine = _chain_deviation(u.values, h, q)
    coarse = _chain_deviation(u.values[::2], 2.0 * h, q)
    slope = math.log2(coarse / fine) if fine > 0 and coarse > 0 else None
    return ChainRuleResult(deviation=fine, coarse_deviation=coarse, slope=slope)
