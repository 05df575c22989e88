"""
Monotone smooth approximation of rough subsolutions on an inner subdomain.

After the ground-state transform the radial inequality Delta_alpha v >= 0 says
exactly that v is convex in the Green coordinate t = int dr / (alpha^2 S).
Convex functions of one variable are mollified in closed form: the
interpolant V(t) = a + b t + sum c_i (t - t_i)_+ goes to
a + b t + sum c_i eps Psi((t - t_i) / eps), Psi the second antiderivative of
the kernel. The result dominates V, decreases with eps and stays convex.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.interpolate import BSpline

from ..exceptions import DiscretizationError, PreconditionError
from .geometry import GridFunction
from .groundstate import GroundState, solve_dirichlet_ground
from .operators import check_subsolution, lp_norm

logger = logging.getLogger(__name__)

DEFAULT_DIAMETER_FRACTION = 0.1
FLOOR_CELLS = 2.0


@lru_cache(maxsize=1)
def _kernel():
    """Quartic B-spline on [-1, 1] scaled to unit mass, with its first two antiderivatives."""
    base = BSpline.basis_element(np.linspace(-1.0, 1.0, 6), extrapolate=False)
    mass = 2.0 / 5.0
    first = base.antiderivative(1)
    second = base.antiderivative(2)
    return base, first, second, mass


def mollifier(x):
    """Unit-mass quartic B-spline kernel supported on [-1, 1]."""
    base, _, _, mass = _kernel()
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    out[inside] = base(x[inside]) / mass
    return out


def ramp_profile(x):
    """Psi(x) = int (x - s)_+ rho(s) ds: 0 for x <= -1, x for x >= 1."""
    _, first, second, mass = _kernel()
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, x, 0.0)
    inside = np.abs(x) < 1.0
    if np.any(inside):
        xi = x[inside]
        anchored = second(xi) - second(-1.0) - first(-1.0) * (xi + 1.0)
        out[inside] = anchored / mass
    return out


@dataclass(frozen=True, eq=False)
class GreenCoordinate:
    grid: object
    t: np.ndarray
    r0: float

    def __call__(self, r):
        return np.interp(r, self.grid.nodes, self.t)

    @property
    def diameter(self):
        return float(self.t[-1] - self.t[0])

    @property
    def max_step(self):
        return float(np.max(np.diff(self.t)))

    def divided_differences(self, values):
        return np.diff(values) / np.diff(self.t)


def green_coordinate(grid, gs=None, omega=None, conduction=None):
    """
    t(r) = int_{r0}^r d rho / w, accumulated cell by cell as h / w_{i+1/2}.

    w is the weighted conduction of gs when given, the grid's own conduction
    otherwise, or an explicit array of half-node values.
    """
    if gs is not None:
        window = gs.grid
        w = gs.weighted.w_half
    else:
        window = grid if omega is None else grid.window_between(*omega)
        lo = window.offset - grid.offset
        w = grid.w_half[lo:lo + window.size - 1] if conduction is None else np.asarray(conduction, dtype=float)
    if window.left_kind == 'pole':
        raise PreconditionError('Green coordinate is singular at a pole; choose a domain with r_min > 0.')
    if w.shape != (window.size - 1,) or np.any(w <= 0):
        raise PreconditionError('Green coordinate needs a strictly positive conduction on every cell.')
    t = np.concatenate([[0.0], np.cumsum(window.h / w)])
    t.setflags(write=False)
    return GreenCoordinate(grid=window, t=t, r0=window.r_min)


def convex_jumps(values, green):
    """Jumps of the divided differences in t; nonnegative iff the samples are convex in t."""
    return np.diff(green.divided_differences(values))


@dataclass(frozen=True, eq=False)
class ApproxSequence:
    u: GridFunction
    iterates: List[GridFunction]
    radii: List[float]
    ground_state: Optional[GroundState]
    operator: object
    eps0: float = 0.0
    floor_bound: bool = False
    clamped_mass: float = 0.0
    green: Optional[GreenCoordinate] = field(default=None, repr=False)
    input_certificate: Optional[object] = field(default=None, repr=False)

    @property
    def inner(self):
        return self.u.grid


def _evaluate_mollified(t_eval, t_nodes, a, slope, jumps, eps):
    values = a + slope * (t_eval - t_nodes[0])
    active = np.nonzero(jumps)[0]
    if active.size:
        kinks = t_nodes[1:-1][active]
        shape = ramp_profile((t_eval[:, None] - kinks[None, :]) / eps)
        values = values + eps * shape @ jumps[active]
    return values


def monotone_smooth_approx(u, A, omega=None, K=4, eps0=None, tol=None):
    """
    Decreasing sequence of smooth subsolutions above u on the inner domain.

    Returns an ApproxSequence whose iterates live on the window of nodes at
    t-distance at least eps0 from the ends of omega.
    """
    if K < 2:
        raise PreconditionError(f'Approximation sequence needs K >= 2, got {K}.')
    window = A.grid if omega is None else A.grid.window_between(*omega)
    L = A if window is A.grid else A.restricted(window)
    u_omega = u.restrict(window) if u.grid is not window else u
    certificate = check_subsolution(u_omega, L, tol=tol)
    if not certificate.passed:
        raise PreconditionError(
            f'Input is not a subsolution on [{window.r_min:g}, {window.r_max:g}] '
            f'(pairing {certificate.min_pairing:.3e} at r = {certificate.worst_radius:.4g}).'
        )

    if L.is_laplacian:
        gs = GroundState.build(L, np.ones(window.size), 1.0)
    else:
        gs = solve_dirichlet_ground(L, None, c=1.0)
    green = green_coordinate(window, gs=gs)
    alpha = gs.alpha.values
    v = u_omega.values / alpha
    t = green.t

    slopes = green.divided_differences(v)
    jumps = np.diff(slopes)
    scale = max(float(np.max(np.abs(slopes))), 1e-300)
    negative = jumps < 0
    clamped = float(-jumps[negative].sum())
    if clamped:
        logger.debug('clamped %.3e of negative convexity jumps (relative %.2e)', clamped, clamped / scale)
    jumps = np.where(negative, 0.0, jumps)

    eps0 = DEFAULT_DIAMETER_FRACTION * green.diameter if eps0 is None else float(eps0)
    if not eps0 > 0:
        raise PreconditionError('eps0 must be positive.')
    inner_mask = (t >= t[0] + eps0) & (t <= t[-1] - eps0)
    inner_idx = np.nonzero(inner_mask)[0]
    if inner_idx.size < 3:
        raise DiscretizationError(
            f'Domain [{window.r_min:g}, {window.r_max:g}] is too small for eps0 = {eps0:.3g}; '
            'pass a smaller eps0 or widen the domain.'
        )
    inner = window.window(int(inner_idx[0]), int(inner_idx[-1]))
    t_inner = t[inner_idx[0]:inner_idx[-1] + 1]
    alpha_inner = alpha[inner_idx[0]:inner_idx[-1] + 1]

    floor = FLOOR_CELLS * green.max_step
    radii, floor_bound = [], False
    for k in range(1, K + 1):
        eps = eps0 * 2.0 ** (-k)
        if eps < floor:
            eps, floor_bound = floor, True
        radii.append(min(eps, eps0))
    if floor_bound:
        logger.info('mollifier radius floor %.3g (two t-cells) binds; later iterates repeat', floor)

    iterates = [
        GridFunction(inner, alpha_inner * _evaluate_mollified(t_inner, t, v[0], slopes[0], jumps, eps))
        for eps in radii
    ]
    return ApproxSequence(
        u=u_omega.restrict(inner),
        iterates=iterates,
        radii=radii,
        ground_state=gs,
        operator=L.restricted(inner),
        eps0=eps0,
        floor_bound=floor_bound,
        clamped_mass=clamped,
        green=green,
        input_certificate=certificate,
    )


@dataclass
class ApproxReport:
    monotone: bool
    monotone_witness: Optional[dict]
    certificates: list
    subsolutions: bool
    l1_table: list
    l1_decay: bool
    sup_differences: list
    convergence: bool
    floor_bound: bool

    @property
    def passed(self):
        return self.monotone and self.subsolutions and self.l1_decay and self.convergence

    def as_dict(self):
        return {
            'passed': self.passed,
            'monotone': self.monotone,
            'monotone_witness': self.monotone_witness,
            'certificates': [c.as_dict() for c in self.certificates],
            'subsolutions': self.subsolutions,
            'l1_table': self.l1_table,
            'l1_decay': self.l1_decay,
            'sup_differences': self.sup_differences,
            'convergence': self.convergence,
            'floor_bound': self.floor_bound,
        }


def verify_approx_properties(seq, rel_tol=1e-12):
    """Check monotonicity, subsolution certificates, L1 decay and nodewise convergence."""
    u = seq.u.values
    stack = np.array([it.values for it in seq.iterates])
    scale = max(1.0, float(np.max(np.abs(stack))), float(np.max(np.abs(u))))
    tol = rel_tol * scale

    witness = None
    below = stack - u[None, :]
    if np.min(below) < -tol:
        k, i = np.unravel_index(int(np.argmin(below)), below.shape)
        witness = {'property': 'u <= u_k', 'k': int(k + 1), 'node': int(i + seq.inner.offset),
                   'radius': float(seq.inner.nodes[i]), 'gap': float(below[k, i])}
    else:
        steps = stack[:-1] - stack[1:]
        if steps.size and np.min(steps) < -tol:
            k, i = np.unravel_index(int(np.argmin(steps)), steps.shape)
            witness = {'property': 'u_{k+1} <= u_k', 'k': int(k + 1), 'node': int(i + seq.inner.offset),
                       'radius': float(seq.inner.nodes[i]), 'gap': float(steps[k, i])}
    monotone = witness is None

    certificates = [check_subsolution(it, seq.operator) for it in seq.iterates]

    l1_table = []
    previous = None
    for k, (it, eps) in enumerate(zip(seq.iterates, seq.radii), start=1):
        error = lp_norm(it - seq.u, 1)
        ratio = error / previous if previous else None
        l1_table.append({'k': k, 'eps': eps, 'l1_error': error, 'ratio': ratio})
        previous = error
    errors = [row['l1_error'] for row in l1_table]
    l1_scale = tol * max(1.0, seq.inner.volume())
    nonincreasing = all(b <= a + l1_scale for a, b in zip(errors, errors[1:]))
    shrink = seq.radii[-1] / seq.radii[0]
    l1_decay = nonincreasing and errors[-1] <= errors[0] * shrink * (1 + 1e-6) + l1_scale

    sups = [float(np.max(np.abs(it.values - u))) for it in seq.iterates]
    convergence = monotone and sups[-1] <= sups[0] * shrink * (1 + 1e-6) + tol

    return ApproxReport(
        monotone=monotone,
        monotone_witness=witness,
        certificates=certificates,
        subsolutions=all(c.passed for c in certificates),
        l1_table=l1_table,
        l1_decay=l1_decay,
        sup_differences=sups,
        convergence=convergence,
        floor_bound=seq.floor_bound,
    )
