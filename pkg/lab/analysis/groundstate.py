"""
Positive solutions alpha of L alpha = 0 and the ground-state transform u -> u / alpha.

Dividing by alpha turns L-subsolutions into subsolutions of the weighted
Laplacian Delta_alpha = alpha^-2 div(alpha^2 grad .). At the discrete level
the weighted conduction is w * alpha_i * alpha_{i+1}, for which
K_alpha(phi / alpha) = alpha * K phi - phi * K alpha holds exactly.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from ..exceptions import DiscretizationError, PreconditionError
from .geometry import GridFunction
from .operators import (
    DiscreteOperator, check_subsolution, default_tolerance, hat_range, laplacian, schrodinger,
    solve_boundary_problem, spectral_bottom, system_bands,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GroundState:
    alpha: GridFunction
    source: DiscreteOperator
    lam: np.ndarray
    weighted: DiscreteOperator
    boundary_value: float

    @property
    def grid(self):
        return self.alpha.grid

    @property
    def weighted_measure(self):
        return self.weighted.measure

    @classmethod
    def build(cls, source, alpha_values, boundary_value, lam=None):
        alpha_values = np.asarray(alpha_values, dtype=float)
        if np.any(alpha_values <= 0):
            node = int(np.argmin(alpha_values))
            raise DiscretizationError(
                f'Ground state is not positive (alpha = {alpha_values[node]:.3e} at r = '
                f'{source.grid.nodes[node]:.4g}); refine the grid.'
            )
        lam = source.lam if lam is None else np.asarray(lam, dtype=float)
        weighted = DiscreteOperator(
            grid=source.grid,
            w_half=source.w_half * alpha_values[:-1] * alpha_values[1:],
            lam=np.zeros(source.grid.size),
            volumes=alpha_values ** 2 * source.volumes,
            measure=alpha_values ** 2 * source.measure,
            left_tag=source.left_tag,
            right_tag=source.right_tag,
            name='weighted',
        )
        return cls(alpha=GridFunction(source.grid, alpha_values), source=source, lam=lam,
                   weighted=weighted, boundary_value=float(boundary_value))

    @classmethod
    def from_samples(cls, source, alpha_fn):
        """Ground state from a closed-form alpha sampled at the nodes (strong residual is then O(h^2))."""
        values = alpha_fn(source.grid.nodes)
        return cls.build(source, values, boundary_value=float(values[-1]))

    def equation_residual(self):
        """max over interior nodes of |(L alpha)_i|."""
        base = self.source
        a = self.alpha.values
        strong = base.stiffness(a) / base.volumes - self.lam * a
        return float(np.max(np.abs(strong[1:-1])))


def _window_operator(A, omega):
    if omega is None:
        return A
    return A.restricted(A.grid.window_between(*omega))


def solve_dirichlet_ground(A, omega=None, c=1.0):
    """
    Positive solution of L alpha = 0 on omega with alpha = c on its boundary.

    A pole inside omega keeps its reflection row; every other end is Dirichlet.
    """
    if not c > 0:
        raise PreconditionError(f'Boundary value must be positive, got {c}.')
    L = _window_operator(A, omega)
    left = None if L.left_tag == 'pole-neumann' else c
    alpha = solve_boundary_problem(L, None, source=0.0, left=left, right=c)
    if alpha.grid is not L.grid:
        raise DiscretizationError('Ground state solve returned values on an unexpected grid.')
    logger.debug('ground state on [%g, %g]: min alpha %.4g', L.grid.r_min, L.grid.r_max, alpha.values.min())
    return GroundState.build(L, alpha.values, c)


def local_ground_state(A, lam, center, half_width, c=1.0, min_nodes=5):
    """
    Ground state of Delta - lam for a negative constant lam on a window around center.

    The window is halved until the bottom of the spectrum of -Delta + lam on it
    is positive; domain monotonicity guarantees this for small windows.
    """
    if lam >= 0:
        raise PreconditionError('local_ground_state is for negative constants; use solve_dirichlet_ground.')
    grid = A.grid
    width = float(half_width)
    while True:
        a = max(grid.r_min, center - width)
        b = min(grid.r_max, center + width)
        lo, hi = grid.index_range(a, b)
        if hi - lo + 1 < min_nodes:
            raise DiscretizationError(
                f'No window around r = {center} with positive spectral bottom for lam = {lam}; refine the grid.'
            )
        bottom = spectral_bottom(A, (grid.nodes[lo], grid.nodes[hi]), potential=lam)
        if bottom > 0:
            break
        logger.debug('bottom %.4g <= 0 on [%g, %g]; halving the window', bottom, a, b)
        width *= 0.5

    window = grid.window(lo, hi)
    L = A.restricted(window)
    ab, _ = system_bands(L, 0, window.size - 1, lam, True, True)
    rhs = np.zeros(window.size)
    rhs[0] = rhs[-1] = c
    try:
        values = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise DiscretizationError('Local ground-state system is singular.') from exc
    state = GroundState.build(L, values, c, lam=L.lam + lam)
    return state, bottom


def ground_transform(u, gs):
    """v = u / alpha on the ground-state grid."""
    if u.grid is not gs.grid:
        u = u.restrict(gs.grid)
    return GridFunction(gs.grid, u.values / gs.alpha.values)


@dataclass(frozen=True)
class PWResidual:
    strong: float
    adjoint: float
    scale: float

    def as_dict(self):
        return {'strong': self.strong, 'adjoint': self.adjoint, 'scale': self.scale}


def verify_pw_identity(gs, phi, v=None):
    """
    Residuals of alpha * Delta_alpha(phi / alpha) = L phi.

    strong: max interior |alpha_i (Delta_alpha(phi/alpha))_i - (L phi)_i|.
    adjoint: |sum v Delta_alpha(phi/alpha) alpha^2 mu - sum alpha v (L phi) mu| in flux form.
    """
    if phi.grid is not gs.grid:
        phi = phi.restrict(gs.grid)
    values = phi.values
    scale_phi = max(1.0, float(np.max(np.abs(values))))
    if abs(values[0]) > 1e-14 * scale_phi or abs(values[-1]) > 1e-14 * scale_phi:
        raise PreconditionError('Test function must vanish at both ends of the ground-state domain.')
    alpha = gs.alpha.values
    base = gs.source
    weighted_flux = gs.weighted.stiffness(values / alpha)
    plain_flux = base.stiffness(values)

    lhs = weighted_flux / (alpha * base.volumes)
    rhs = plain_flux / base.volumes - gs.lam * values
    strong = float(np.max(np.abs(lhs - rhs)[1:-1]))

    test = np.ones_like(values) if v is None else np.asarray(v.values if isinstance(v, GridFunction) else v)
    left_side = test * weighted_flux
    right_side = alpha * test * (plain_flux - gs.lam * values * base.measure)
    adjoint = float(abs(np.sum(left_side) - np.sum(right_side)))
    scale = float(np.sum(np.abs(left_side)) + np.sum(np.abs(right_side)))
    return PWResidual(strong=strong, adjoint=adjoint, scale=scale)


def transport_certificates(u, gs, region=None, tol=None):
    """
    Certificates of L u >= 0 and of Delta_alpha(u / alpha) >= 0 on matched tolerances.

    Hat pairings transport as pairing_alpha(u/alpha, e_j) = alpha_j * pairing_L(u, e_j),
    so the weighted tolerance is the L tolerance scaled by max alpha on the region.
    """
    if u.grid is not gs.grid:
        u = u.restrict(gs.grid)
    first, last = hat_range(gs.grid, region)
    if tol is None:
        tol = default_tolerance(gs.source, u.values, first - 1, last + 1)
    plain = check_subsolution(u, gs.source, region, tol=tol)
    alpha_max = float(np.max(gs.alpha.values[first:last + 1]))
    weighted = check_subsolution(ground_transform(u, gs), gs.weighted, region, tol=tol * alpha_max)
    return plain, weighted


def closed_form_ground_state(profile_kind, n, lam):
    """Known radial solutions of Delta alpha = lam alpha (value at the pole by continuity), or None."""
    if lam == 0:
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    if lam != 1:
        return None
    if profile_kind == 'euclidean' and n == 3:
        return _sinc_ratio(lambda r: np.sinh(r), lambda r: r, 1.0)
    if profile_kind == 'hyperbolic' and n == 3:
        return _sinc_ratio(lambda r: np.sinh(np.sqrt(2.0) * r), np.sinh, np.sqrt(2.0))
    if profile_kind == 'flat':
        return np.cosh
    return None


def _sinc_ratio(top, bottom, at_zero):
    def alpha(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r == 0, 1.0, r)
        return np.where(r == 0, at_zero, top(safe) / bottom(safe))
    return alpha


def ground_state_for(m, grid, lam, omega=None, c=1.0):
    """Discrete ground state of Delta - lam on omega (whole grid by default)."""
    A = laplacian(m, grid) if lam == 0 else schrodinger(m, grid, lam)
    return solve_dirichlet_ground(A, omega, c)
