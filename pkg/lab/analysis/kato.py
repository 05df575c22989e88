"""
Kato-type inequalities: L u >= 0 implies L u_+ >= 0.

Two routes are implemented. The regularization route pairs H_eps(u) against
hats for a decreasing eps ladder; discrete convexity of H_eps makes every
rung an exact inequality. The appendix route splits off the Dirichlet
solution g of Delta g = lam u, smooths the subharmonic rest and checks the
indicator form Delta (u_k)_+ >= 1{u_k > 0} lam u on the inner domain.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import PreconditionError
from .operators import (
    check_subsolution, default_tolerance, hat_range, laplacian, region_indices,
    schrodinger, solve_boundary_problem,
)
from .smoothing import monotone_smooth_approx, verify_approx_properties

logger = logging.getLogger(__name__)

LADDER_FACTORS = (1.0, 1.0 / 4, 1.0 / 16, 1.0 / 64, 1.0 / 256)
POLE_MARGIN = 0.05


def _check_eps(eps):
    if not np.all(np.asarray(eps) > 0):
        raise PreconditionError(f'H_eps needs eps > 0, got {eps}.')


def h_epsilon(t, eps):
    """H_eps(t) = (t + sqrt(t^2 + eps)) / 2, evaluated without cancellation for t < 0."""
    _check_eps(eps)
    t = np.asarray(t, dtype=float)
    root = np.sqrt(t * t + eps)
    negative = eps / (2.0 * (root - np.minimum(t, 0.0)))
    value = np.where(t >= 0, 0.5 * (t + root), negative)
    return value if value.ndim else float(value)


def h_epsilon_prime(t, eps):
    _check_eps(eps)
    t = np.asarray(t, dtype=float)
    # root >= |t| keeps the ratio inside [-1, 1] after rounding
    root = np.maximum(np.sqrt(t * t + eps), np.abs(t))
    value = np.where(t >= 0, 0.5 * (1.0 + t / root), eps / (2.0 * root * (root - np.minimum(t, 0.0))))
    return value if value.ndim else float(value)


@dataclass
class KatoReport:
    route: str
    input_certificate: object
    output_certificate: object
    ladder: list
    extras: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.output_certificate.passed and all(self.conditions.values()))

    def as_dict(self):
        return {
            'route': self.route,
            'passed': self.passed,
            'input_certificate': self.input_certificate.as_dict(),
            'output_certificate': self.output_certificate.as_dict(),
            'ladder': self.ladder,
            'conditions': self.conditions,
            **self.extras,
        }


def _operator_for(u, lam):
    grid = u.grid
    if np.isscalar(lam) and lam == 0:
        return laplacian(grid.manifold, grid)
    return schrodinger(grid.manifold, grid, lam)


def _require_subsolution(u, A, omega):
    certificate = check_subsolution(u, A, omega)
    if not certificate.passed:
        raise PreconditionError(
            f'L u >= 0 fails (pairing {certificate.min_pairing:.3e} at r = {certificate.worst_radius:.4g}); '
            'Kato inequalities start from a certified subsolution.'
        )
    return certificate


def ladder_pairings(u, A, eps, first, last):
    """(K H_eps(u))_j - lam_j u_j H'_eps(u_j) mu_j for hats first..last."""
    values = u.values
    smoothed = h_epsilon(values, eps)
    pairings = A.stiffness(smoothed) - A.lam * values * h_epsilon_prime(values, eps) * A.measure
    return pairings[first:last + 1]


def brezis_kato_check(u, lam, omega=None, eps_ladder=None):
    """Regularization route: eps ladder of H_eps(u) pairings, then the u_+ certificate."""
    A = _operator_for(u, lam)
    input_certificate = _require_subsolution(u, A, omega)
    first, last = hat_range(A.grid, omega)
    lo, hi = region_indices(A.grid, omega)
    scale = float(np.max(np.abs(u.values[lo:hi + 1]))) or 1.0
    if eps_ladder is None:
        eps_ladder = [factor * scale ** 2 for factor in LADDER_FACTORS]
    positive = u.positive_part()
    tol = default_tolerance(A, u.values, lo, hi)
    output_certificate = check_subsolution(positive, A, omega, tol=tol)

    ladder = []
    for eps in sorted(eps_ladder, reverse=True):
        pairings = ladder_pairings(u, A, eps, first, last)
        deviation = float(np.max(np.abs(h_epsilon(u.values[lo:hi + 1], eps) - positive.values[lo:hi + 1])))
        ladder.append({
            'eps': float(eps),
            'min_pairing': float(pairings.min()),
            'gap_to_limit': float(pairings.min() - output_certificate.min_pairing),
            'sup_deviation': deviation,
            'deviation_bound': math.sqrt(eps) / 2.0,
            'max_h_prime': float(np.max(h_epsilon_prime(u.values, eps))),
        })
    logger.debug('Brezis-Kato ladder of %d rungs, u_+ min pairing %.3e', len(ladder), output_certificate.min_pairing)
    return KatoReport(route='regularization', input_certificate=input_certificate,
                      output_certificate=output_certificate, ladder=ladder)


def _appendix_domain(grid, omega):
    lo, hi = region_indices(grid, omega)
    window = grid if (lo, hi) == (0, grid.size - 1) else grid.window(lo, hi)
    return window


def kato_via_appendix(u, lam, omega=None, K=4, eps0=None):
    """
    Appendix route: g with Delta g = lam u (g = 0 on the boundary), w = u - g,
    smooth w with the plain Laplacian, u_k = w_k + g, indicator-form check per k.

    A pole inside omega keeps its reflection row for g; the smoothing domain
    then starts POLE_MARGIN * r_max away from it, where the Green coordinate is finite.
    """
    A = _operator_for(u, lam)
    input_certificate = _require_subsolution(u, A, omega)
    window = _appendix_domain(A.grid, omega)
    L = A if window is A.grid else A.restricted(window)
    u_omega = u if u.grid is window else u.restrict(window)
    lap = L.without_potential()

    left = None if L.left_tag == 'pole-neumann' else 0.0
    g = solve_boundary_problem(lap, None, source=L.lam * u_omega.values, left=left, right=0.0)
    w = u_omega - g

    smoothing_omega = None
    if window.left_kind == 'pole':
        smoothing_omega = (POLE_MARGIN * window.r_max, window.r_max)
    seq = monotone_smooth_approx(w, lap, smoothing_omega, K=K, eps0=eps0, tol=input_certificate.tolerance)
    inner = seq.inner
    L_inner = L.restricted(inner)
    g_inner = g.restrict(inner)
    u_inner = u_omega.restrict(inner)

    ladder = []
    tol = default_tolerance(L_inner, u_inner.values, 0, inner.size - 1)
    output_certificate = check_subsolution(u_inner.positive_part(), L_inner, tol=tol)
    for k, (w_k, eps) in enumerate(zip(seq.iterates, seq.radii), start=1):
        u_k = (w_k + g_inner).values
        positive = np.maximum(u_k, 0.0)
        indicator = (u_k > 0).astype(float)
        stiff_positive = L_inner.stiffness(positive)
        ancona = stiff_positive - indicator * L_inner.lam * u_inner.values * L_inner.measure
        classical = stiff_positive - indicator * L_inner.stiffness(u_k)
        ladder.append({
            'k': k,
            'eps': float(eps),
            'min_ancona_pairing': float(ancona[1:-1].min()),
            'gap_to_limit': float(ancona[1:-1].min() - output_certificate.min_pairing),
            'min_classical_kato': float(classical[1:-1].min()),
            'positive_nodes': int(indicator.sum()),
            'sup_distance_to_u': float(np.max(np.abs(u_k - u_inner.values))),
        })

    # as u_k -> u the indicator-form pairings of (u_k)_+ tend to the L u_+ pairings
    last = ladder[-1]
    iterate_limit = {
        'k': last['k'],
        'min_pairing': last['min_ancona_pairing'],
        'gap_to_certificate': last['gap_to_limit'],
        'tolerance': tol,
        'passed': last['min_ancona_pairing'] >= -tol,
    }
    approx = verify_approx_properties(seq)
    regularization = brezis_kato_check(u, lam, omega)
    regular_inner = check_subsolution(u_inner.positive_part(), L_inner, tol=regularization.output_certificate.tolerance)
    combined_tol = output_certificate.tolerance + regular_inner.tolerance
    ancona_passed = all(row['min_ancona_pairing'] >= -tol for row in ladder)
    conditions = {'ancona': ancona_passed, 'approximation': approx.passed}
    appendix_passed = bool(output_certificate.passed and all(conditions.values()))
    agreement = {
        'regularization_passed': regularization.passed,
        'appendix_passed': appendix_passed,
        'same_verdict': regularization.passed == appendix_passed,
        'min_pairing_gap': abs(regular_inner.min_pairing - output_certificate.min_pairing),
        'combined_tolerance': combined_tol,
    }
    extras = {
        'inner_domain': [inner.r_min, inner.r_max],
        'ancona_passed': ancona_passed,
        'classical_kato_passed': all(row['min_classical_kato'] >= -tol for row in ladder),
        'iterate_limit': iterate_limit,
        'approximation': approx.as_dict(),
        'agreement': agreement,
        'g_sup': g.sup_norm(),
    }
    return KatoReport(route='appendix', input_certificate=input_certificate,
                      output_certificate=output_certificate, ladder=ladder, extras=extras,
                      conditions=conditions)


@dataclass(frozen=True)
class CoverReport:
    pieces: list
    combined_min: float
    union: object
    consistent: bool

    @property
    def passed(self):
        return all(piece.passed for piece in self.pieces) and self.union.passed

    def as_dict(self):
        return {
            'passed': self.passed,
            'pieces': [piece.as_dict() for piece in self.pieces],
            'combined_min': self.combined_min,
            'union': self.union.as_dict(),
            'consistent': self.consistent,
        }


def check_on_cover(u, A, regions, tol=None):
    """
    Certificates on overlapping subintervals and on their union.

    Consecutive regions must overlap by at least two cells so that every hat
    supported in the union is supported in one of the pieces.
    """
    if not regions:
        raise PreconditionError('Cover needs at least one region.')
    grid = A.grid
    ranges = sorted(grid.index_range(a, b) for a, b in regions)
    for (lo_a, hi_a), (lo_b, hi_b) in zip(ranges, ranges[1:]):
        if hi_a - lo_b < 2:
            raise PreconditionError('Cover pieces must overlap by at least two cells.')
    lo, hi = ranges[0][0], max(r[1] for r in ranges)
    union_region = (grid.nodes[lo], grid.nodes[hi])
    if tol is None:
        first, last = hat_range(grid, union_region)
        tol = default_tolerance(A, u.values, first - 1, last + 1)
    pieces = [check_subsolution(u, A, (grid.nodes[a], grid.nodes[b]), tol=tol) for a, b in ranges]
    union = check_subsolution(u, A, union_region, tol=tol)
    combined = min(piece.min_pairing for piece in pieces)
    return CoverReport(pieces=pieces, combined_min=combined, union=union,
                       consistent=combined == union.min_pairing)


def positive_part_certificate(u, lam, omega=None, tol=None):
    A = _operator_for(u, lam)
    return check_subsolution(u.positive_part(), A, omega, tol=tol)
