"""
Divergence-form radial operators, their pairings and inequality certificates.

Every operator is stored as a conduction w at half nodes, a zero-order
coefficient per node and the node volumes of its measure. The stiffness part
(K u)_i = F_{i+1/2} - F_{i-1/2}, F = w * Du, is symmetric, so pairings are
evaluated in flux form and summation by parts holds to rounding.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from scipy.linalg import LinAlgError, solve_banded, solveh_banded

from ..exceptions import ConvergenceError, DiscretizationError, PreconditionError
from .geometry import GridFunction

logger = logging.getLogger(__name__)

BOUNDARY_TAGS = ('pole-neumann', 'dirichlet', 'natural')
END_TAGS = {
    'pole': 'pole-neumann',
    'open': 'dirichlet',
    'truncation': 'natural',
    'boundary': 'dirichlet',
    'cut': 'dirichlet',
}


def certificate_constant():
    try:
        return float(getattr(settings, 'LAB_CERTIFICATE_CONSTANT', 10.0))
    except ImproperlyConfigured:
        return 10.0


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: object
    w_half: np.ndarray
    lam: np.ndarray
    volumes: np.ndarray
    measure: np.ndarray
    left_tag: str
    right_tag: str
    name: str = 'laplacian'

    def __post_init__(self):
        size = self.grid.size
        if self.w_half.shape != (size - 1,) or self.lam.shape != (size,):
            raise PreconditionError('Operator coefficients do not match the grid.')
        if np.any(self.w_half <= 0) or not np.all(np.isfinite(self.w_half)):
            raise PreconditionError('Conduction weights must be finite and strictly positive.')
        if np.any(self.lam < 0):
            raise PreconditionError('Zero-order coefficient must be nonnegative.')
        for tag in (self.left_tag, self.right_tag):
            if tag not in BOUNDARY_TAGS:
                raise PreconditionError(f'Unknown boundary tag "{tag}".')

    @property
    def h(self):
        return self.grid.h

    @property
    def is_laplacian(self):
        return not np.any(self.lam)

    def flux(self, values):
        return self.w_half * np.diff(values) / self.h

    def stiffness(self, values):
        """K u with zero flux beyond both ends; symmetric in the Euclidean inner product."""
        values = np.asarray(values, dtype=float)
        flux = self.flux(values)
        out = np.zeros_like(values)
        out[:-1] += flux
        out[1:] -= flux
        return out

    def apply(self, u):
        """Strong action A u = K u / vol - lam u (one-sided rows at the ends)."""
        values = _values(u)
        return GridFunction(self.grid, self.stiffness(values) / self.volumes - self.lam * values)

    def hat_pairings(self, u):
        """Pairing of u with every nodal hat e_j: (K u)_j - lam_j u_j mu_j."""
        values = _values(u)
        return self.stiffness(values) - self.lam * values * self.measure

    def restricted(self, window):
        """The same operator on a window of its grid; cut ends become Dirichlet."""
        if not self.grid.contains(window):
            raise PreconditionError('Window is not a sub-grid of the operator grid.')
        lo = window.offset - self.grid.offset
        hi = lo + window.size - 1
        measure = self.measure[lo:hi + 1].copy()
        volumes = self.volumes[lo:hi + 1].copy()
        if lo > 0:
            measure[0] = volumes[0] = 0.5 * self.measure[lo]
        if hi < self.grid.size - 1:
            measure[-1] = volumes[-1] = 0.5 * self.measure[hi]
        return DiscreteOperator(
            grid=window,
            w_half=self.w_half[lo:hi],
            lam=self.lam[lo:hi + 1],
            volumes=volumes,
            measure=measure,
            left_tag=self.left_tag if lo == 0 else 'dirichlet',
            right_tag=self.right_tag if hi == self.grid.size - 1 else 'dirichlet',
            name=self.name,
        )

    def without_potential(self):
        return replace(self, lam=np.zeros(self.grid.size), name='laplacian')

    def bands(self):
        """Diagonal and off-diagonal of -K (symmetric tridiagonal)."""
        diag = np.zeros(self.grid.size)
        diag[:-1] += self.w_half / self.h
        diag[1:] += self.w_half / self.h
        return diag, -self.w_half / self.h

    def describe(self):
        return {
            'name': self.name,
            'lambda_max': float(self.lam.max()),
            'left_tag': self.left_tag,
            'right_tag': self.right_tag,
        }


def _values(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def _check_grid(grid, manifold):
    if manifold is not None and grid.manifold != manifold:
        raise PreconditionError('Grid was built for a different model manifold.')


def laplacian(m, grid):
    _check_grid(grid, m)
    return DiscreteOperator(
        grid=grid,
        w_half=np.array(grid.w_half),
        lam=np.zeros(grid.size),
        volumes=grid.control_volumes(),
        measure=np.array(grid.mu),
        left_tag=END_TAGS[grid.left_kind],
        right_tag=END_TAGS[grid.right_kind],
    )


def schrodinger(m, grid, lam):
    """L = Delta - lam; lam is a scalar, an array of node samples or a callable of r."""
    _check_grid(grid, m)
    if callable(lam):
        samples = np.asarray(lam(grid.nodes), dtype=float) * np.ones(grid.size)
    else:
        samples = np.asarray(lam, dtype=float) * np.ones(grid.size)
    if not np.all(np.isfinite(samples)):
        raise PreconditionError('Potential samples must be finite.')
    if np.any(samples < 0):
        raise PreconditionError(
            f'Schrodinger potential must be nonnegative (min sample {samples.min():.3g}); '
            'negative constants enter only through spectral_bottom(potential=...).'
        )
    base = laplacian(m, grid)
    return DiscreteOperator(
        grid=grid, w_half=base.w_half, lam=samples, volumes=base.volumes, measure=base.measure,
        left_tag=base.left_tag, right_tag=base.right_tag,
        name='laplacian' if not np.any(samples) else 'schrodinger',
    )


def _require_test_function(phi, grid):
    values = _values(phi)
    if values.shape != (grid.size,):
        raise PreconditionError('Test function lives on a different grid.')
    scale = max(1.0, float(np.max(np.abs(values))))
    if abs(values[0]) > 1e-14 * scale or abs(values[-1]) > 1e-14 * scale:
        raise PreconditionError('Test function must vanish at both ends of the grid.')
    return values


def _same_grid(u, A):
    if isinstance(u, GridFunction) and u.grid is not A.grid:
        raise PreconditionError('Function and operator live on different grids.')


def pair_distributional(u, phi, A):
    """sum_i u_i (A phi)_i mu_i, in flux form."""
    _same_grid(u, A)
    phi_values = _require_test_function(phi, A.grid)
    u_values = _values(u)
    return float(np.dot(u_values, A.stiffness(phi_values)) - np.dot(A.lam * u_values * phi_values, A.measure))


def weak_form_pair(u, phi, A):
    """-sum w (Du)(Dphi) h - sum lam u phi mu."""
    _same_grid(u, A)
    phi_values = _require_test_function(phi, A.grid)
    u_values = _values(u)
    h = A.h
    gradient = -np.sum(A.w_half * (np.diff(u_values) / h) * (np.diff(phi_values) / h)) * h
    return float(gradient - np.dot(A.lam * u_values * phi_values, A.measure))


def hat(grid, j):
    values = np.zeros(grid.size)
    values[j] = 1.0
    return GridFunction(grid, values)


@dataclass(frozen=True)
class IneqCertificate:
    """Outcome of pairing a function against the hat family of a region."""
    min_pairing: float
    worst_node: int
    worst_radius: float
    tolerance: float
    passed: bool
    hats: int

    def as_dict(self):
        return {
            'min_pairing': self.min_pairing,
            'worst_node': self.worst_node,
            'worst_radius': self.worst_radius,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'hats': self.hats,
        }


def region_indices(grid, region):
    """Node range (lo, hi) of a region given as None, (a, b) radii or a window grid."""
    if region is None:
        return 0, grid.size - 1
    if hasattr(region, 'offset'):
        lo = region.offset - grid.offset
        return lo, lo + region.size - 1
    return grid.index_range(*region)


def hat_range(grid, region):
    lo, hi = region_indices(grid, region)
    first, last = max(lo + 1, 1), min(hi - 1, grid.size - 2)
    if last < first:
        raise PreconditionError('Region supports no hat function; it needs at least three nodes inside the grid.')
    return first, last


def default_tolerance(A, values, lo, hi, constant=None):
    constant = certificate_constant() if constant is None else constant
    scale = float(np.max(np.abs(values[lo:hi + 1])))
    conduction = float(np.max(A.w_half[max(lo - 1, 0):hi + 1]))
    return constant * A.h ** 3 * scale * conduction


def check_subsolution(u, A, region=None, tol=None):
    """Certificate of A u >= 0 against every hat supported in region."""
    _same_grid(u, A)
    values = _values(u)
    first, last = hat_range(A.grid, region)
    pairings = A.hat_pairings(values)[first:last + 1]
    if tol is None:
        tol = default_tolerance(A, values, first - 1, last + 1)
    worst = int(np.argmin(pairings))
    min_pairing = float(pairings[worst])
    node = first + worst
    return IneqCertificate(
        min_pairing=min_pairing,
        worst_node=node + A.grid.offset,
        worst_radius=float(A.grid.nodes[node]),
        tolerance=float(tol),
        passed=bool(min_pairing >= -tol),
        hats=last - first + 1,
    )


def lp_norm(u, p, region=None):
    if not 1 <= p < math.inf:
        raise PreconditionError(f'lp_norm needs 1 <= p < inf, got {p}.')
    grid = u.grid
    lo, hi = region_indices(grid, region)
    weights = grid.region_weights(lo, hi)
    return float(np.sum(np.abs(u.values[lo:hi + 1]) ** p * weights) ** (1.0 / p))


def w12_seminorm(u, region=None, conduction=None):
    """(sum w (Du)^2 h)^(1/2) over the cells of region."""
    grid = u.grid
    lo, hi = region_indices(grid, region)
    w = grid.w_half if conduction is None else conduction
    du = np.diff(u.values[lo:hi + 1]) / grid.h
    return float(np.sqrt(np.sum(w[lo:hi] * du ** 2) * grid.h))


def _scaled_bands(A, lo, hi, potential):
    """Interior-node tridiagonal of M^{-1/2}(-K + lam M + c M)M^{-1/2} with Dirichlet ends lo, hi."""
    diag, off = A.bands()
    idx = slice(lo + 1, hi)
    mass = A.measure[idx]
    if np.any(mass <= 0):
        raise PreconditionError('Spectral domain must avoid nodes of zero measure.')
    root = np.sqrt(mass)
    d = diag[idx] / mass + A.lam[idx] + potential
    e = off[lo + 1:hi - 1] / (root[:-1] * root[1:])
    return d, e


def spectral_bottom(A, domain=None, potential=0.0, tol=1e-12, maxiter=200):
    """
    Smallest eigenvalue of -A + potential on domain with Dirichlet ends.

    Inverse iteration from a Gershgorin lower shift (the shifted matrix is
    positive definite, solved with a banded Cholesky), polished by a few
    Rayleigh quotient steps.
    """
    lo, hi = region_indices(A.grid, domain)
    if hi - lo - 1 < 3:
        raise PreconditionError('spectral_bottom needs at least 3 interior nodes.')
    d, e = _scaled_bands(A, lo, hi, potential)
    size = d.size
    radius = np.zeros(size)
    radius[:-1] += np.abs(e)
    radius[1:] += np.abs(e)
    shift = float(np.min(d - radius))
    shift -= 1e-3 * max(1.0, abs(shift))

    def product(x):
        y = d * x
        y[:-1] += e * x[1:]
        y[1:] += e * x[:-1]
        return y

    upper = np.zeros((2, size))
    upper[0, 1:] = e
    upper[1] = d - shift
    x = np.ones(size) / math.sqrt(size)
    rho = float(x @ product(x))
    change = math.inf
    for iteration in range(1, maxiter + 1):
        try:
            y = solveh_banded(upper, x)
        except LinAlgError as exc:
            raise ConvergenceError('Shifted spectral system is not positive definite.',
                                   diagnostics={'shift': shift, 'iteration': iteration}) from exc
        x = y / np.linalg.norm(y)
        new_rho = float(x @ product(x))
        change = abs(new_rho - rho)
        rho = new_rho
        if change <= tol * max(1.0, abs(rho)):
            break
    else:
        raise ConvergenceError(
            'Inverse iteration stagnated.',
            diagnostics={'iterations': maxiter, 'last_change': change, 'estimate': rho, 'shift': shift},
        )

    residual = float(np.linalg.norm(product(x) - rho * x))
    for _ in range(3):
        if residual <= 1e-14 * max(1.0, abs(rho)):
            break
        ab = np.zeros((3, size))
        ab[0, 1:] = e
        ab[1] = d - rho
        ab[2, :-1] = e
        try:
            y = solve_banded((1, 1), ab, x)
        except (LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(y)):
            break
        candidate = y / np.linalg.norm(y)
        candidate_rho = float(candidate @ product(candidate))
        candidate_residual = float(np.linalg.norm(product(candidate) - candidate_rho * candidate))
        if candidate_residual >= residual:
            break
        x, rho, residual = candidate, candidate_rho, candidate_residual
    logger.debug('spectral bottom %.12g after %d inverse steps (residual %.2e)', rho, iteration, residual)
    return rho


def system_bands(A, lo, hi, shift, dirichlet_left, dirichlet_right):
    """Banded (1, 1) storage of -K + shift * vol on nodes lo..hi, identity rows at Dirichlet ends."""
    diag, off = A.bands()
    vol = A.volumes.copy()
    if lo > 0:
        vol[lo] = 0.5 * A.measure[lo]
    if hi < A.grid.size - 1:
        vol[hi] = 0.5 * A.measure[hi]
    d = diag[lo:hi + 1] + shift * vol[lo:hi + 1]
    # rows lo and hi only see the cells inside [lo, hi]
    if lo > 0:
        d[0] -= A.w_half[lo - 1] / A.h
    if hi < A.grid.size - 1:
        d[-1] -= A.w_half[hi] / A.h
    upper = off[lo:hi].copy()
    lower = off[lo:hi].copy()
    if dirichlet_left:
        d[0], upper[0] = 1.0, 0.0
    if dirichlet_right:
        d[-1], lower[-1] = 1.0, 0.0
    ab = np.zeros((3, hi - lo + 1))
    ab[0, 1:] = upper
    ab[1] = d
    ab[2, :-1] = lower
    return ab, vol[lo:hi + 1]


def solve_boundary_problem(A, region=None, source=0.0, left=None, right=None):
    """
    Solve (A u)_i = source_i inside region.

    left/right are Dirichlet values; None keeps the operator's own end row,
    which is only allowed at a grid end tagged pole-neumann or natural.
    Returns a GridFunction on the window of region.
    """
    grid = A.grid
    lo, hi = region_indices(grid, region)
    for value, index, tag in ((left, lo, A.left_tag), (right, hi, A.right_tag)):
        at_end = index in (0, grid.size - 1)
        if value is None and not (at_end and tag != 'dirichlet'):
            raise PreconditionError(f'Node {index} needs a Dirichlet value.')
    ab, vol = system_bands(A, lo, hi, 0.0, left is not None, right is not None)
    interior = np.ones(hi - lo + 1, dtype=bool)
    if left is not None:
        interior[0] = False
    if right is not None:
        interior[-1] = False
    ab[1, interior] += A.lam[lo:hi + 1][interior] * vol[interior]
    f = np.asarray(source, dtype=float) * np.ones(grid.size)
    rhs = -f[lo:hi + 1] * vol
    if left is not None:
        rhs[0] = left
    if right is not None:
        rhs[-1] = right
    try:
        values = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise DiscretizationError(f'Boundary value problem on nodes {lo}..{hi} is singular.') from exc
    if not np.all(np.isfinite(values)):
        raise DiscretizationError(f'Boundary value problem on nodes {lo}..{hi} produced non-finite values.')
    window = grid if (lo, hi) == (0, grid.size - 1) else grid.window(lo, hi)
    return GridFunction(window, values)


@dataclass(frozen=True)
class ResolventReport:
    passed: bool
    min_entry: float
    witness_row: int
    witness_column: int
    sign_pattern: bool
    shift: float
    nodes: int

    def as_dict(self):
        return {
            'passed': self.passed,
            'min_entry': self.min_entry,
            'witness_row': self.witness_row,
            'witness_column': self.witness_column,
            'sign_pattern': self.sign_pattern,
            'shift': self.shift,
            'nodes': self.nodes,
        }


def resolvent_matrix(m, grid, shift=1.0):
    """Inverse of -Delta_h + shift (flux form, Dirichlet rows set to identity)."""
    A = laplacian(m, grid)
    size = grid.size
    ab, vol = system_bands(A, 0, size - 1, shift, A.left_tag == 'dirichlet', A.right_tag == 'dirichlet')
    try:
        inverse = solve_banded((1, 1), ab, np.eye(size))
    except (LinAlgError, ValueError) as exc:
        raise DiscretizationError(f'Resolvent system with shift {shift} is singular.') from exc
    if not np.all(np.isfinite(inverse)):
        raise DiscretizationError(f'Resolvent system with shift {shift} is numerically singular.')
    return ab, inverse


def resolvent_positivity(m, grid, shift=1.0):
    """Entrywise sign of (-Delta_h + shift)^{-1}; shift = -1 exhibits the lost maximum principle."""
    ab, inverse = resolvent_matrix(m, grid, shift)
    row, column = np.unravel_index(int(np.argmin(inverse)), inverse.shape)
    min_entry = float(inverse[row, column])
    tol = 1e-12 * float(np.max(np.abs(inverse)))
    off_diagonal = np.concatenate([ab[0, 1:], ab[2, :-1]])
    sign_pattern = bool(np.all(ab[1] > 0) and np.all(off_diagonal <= 0) and shift >= 0)
    report = ResolventReport(
        passed=bool(min_entry >= -tol),
        min_entry=min_entry,
        witness_row=int(row),
        witness_column=int(column),
        sign_pattern=sign_pattern,
        shift=float(shift),
        nodes=grid.size,
    )
    if not report.passed:
        logger.info('Resolvent with shift %g has a negative entry %.3e at (%d, %d)', shift, min_entry, row, column)
    return report
