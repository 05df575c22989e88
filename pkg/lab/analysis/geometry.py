"""
Rotationally symmetric model manifolds, their radial grids and sampled functions.

A model manifold carries the metric dr^2 + sigma(r)^2 * (round sphere metric);
every radial quantity is weighted by the area density S(r) = omega_{n-1} *
sigma(r)^(n-1), so discrete norms built here are genuine L^p(M) norms.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from ..exceptions import GeometryError, PreconditionError

logger = logging.getLogger(__name__)

PROFILE_KINDS = (
    'euclidean', 'hyperbolic', 'superexp', 'linear-cap',
    'custom-samples', 'flat', 'finite-volume',
)
LEFT_KINDS = ('pole', 'open')
RIGHT_KINDS = ('truncation', 'boundary')

# Gauss-Legendre rule used for cell integrals of S and 1/S.
_GAUSS_X, _GAUSS_W = leggauss(6)

# Quintic smoothstep on [1/2, 1] for the superexp preset.
_BLEND_START, _BLEND_END = 0.5, 1.0


def sphere_area(n):
    """Area omega_{n-1} of the unit (n-1)-sphere."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _smoothstep(r):
    s = np.clip((r - _BLEND_START) / (_BLEND_END - _BLEND_START), 0.0, 1.0)
    b = s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
    db = 30.0 * s ** 2 * (1.0 - s) ** 2 / (_BLEND_END - _BLEND_START)
    return b, db


@dataclass(frozen=True)
class WarpingProfile:
    """
    Warping function sigma of a model manifold.

    kind is one of PROFILE_KINDS; growth is the superexp coefficient a (or the
    slope c of linear-cap); samples holds (r, sigma) arrays for custom-samples.
    """
    kind: str
    growth: float = 1.0
    samples: Optional[tuple] = None
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise GeometryError(f'Unknown warping profile "{self.kind}". Choose one of: {", ".join(PROFILE_KINDS)}.')
        if self.kind in ('superexp', 'linear-cap') and not self.growth > 0:
            raise GeometryError(f'{self.kind} profile needs a positive growth coefficient, got {self.growth}.')
        if self.kind == 'custom-samples':
            if self.samples is None:
                raise GeometryError('custom-samples profile needs (r, sigma) samples.')
            r, sigma = (np.asarray(a, dtype=float) for a in self.samples)
            if r.ndim != 1 or r.shape != sigma.shape or r.size < 4:
                raise GeometryError('custom-samples needs two 1-D arrays of equal length (at least 4 points).')
            if np.any(np.diff(r) <= 0):
                raise GeometryError('custom-samples radii must be strictly increasing.')
            object.__setattr__(self, 'samples', (tuple(r.tolist()), tuple(sigma.tolist())))
            object.__setattr__(self, '_spline', CubicSpline(r, sigma))

    @classmethod
    def preset(cls, kind, growth=1.0):
        return cls(kind=kind, growth=growth)

    def sigma(self, r):
        r = np.asarray(r, dtype=float)
        kind = self.kind
        if kind == 'euclidean':
            return r.copy()
        if kind == 'hyperbolic':
            return np.sinh(r)
        if kind == 'flat':
            return np.ones_like(r)
        if kind == 'finite-volume':
            return r / (1.0 + r ** 2)
        if kind == 'linear-cap':
            return self.growth * r
        if kind == 'custom-samples':
            return self._spline(r)
        b, _ = _smoothstep(r)
        with np.errstate(over='ignore'):
            grown = np.exp(self.growth * r ** 3)
        return np.where(r >= _BLEND_END, grown, (1.0 - b) * r + b * grown)

    def dsigma(self, r):
        r = np.asarray(r, dtype=float)
        kind = self.kind
        if kind == 'euclidean':
            return np.ones_like(r)
        if kind == 'hyperbolic':
            return np.cosh(r)
        if kind == 'flat':
            return np.zeros_like(r)
        if kind == 'finite-volume':
            return (1.0 - r ** 2) / (1.0 + r ** 2) ** 2
        if kind == 'linear-cap':
            return np.full_like(r, self.growth)
        if kind == 'custom-samples':
            return self._spline(r, 1)
        a = self.growth
        b, db = _smoothstep(r)
        with np.errstate(over='ignore'):
            grown = np.exp(a * r ** 3)
        blended = (1.0 - b) + b * 3.0 * a * r ** 2 * grown + db * (grown - r)
        return np.where(r >= _BLEND_END, 3.0 * a * r ** 2 * grown, blended)

    def log_sigma(self, r):
        """log sigma(r), evaluated without overflow for the fast-growing presets."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore'):
            if self.kind == 'hyperbolic':
                return r + np.log(-np.expm1(-2.0 * r) / 2.0)
            if self.kind == 'superexp':
                inner = np.minimum(r, _BLEND_END)
                return np.where(r >= _BLEND_END, self.growth * r ** 3, np.log(self.sigma(inner)))
            return np.log(self.sigma(r))

    def log_derivative(self, r):
        """sigma'/sigma, the drift coefficient of the radial Laplacian (per unit n-1)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            if self.kind == 'superexp':
                inner = np.minimum(r, _BLEND_END)
                return np.where(r >= _BLEND_END, 3.0 * self.growth * r ** 2,
                                self.dsigma(inner) / self.sigma(inner))
            if self.kind == 'hyperbolic':
                return 1.0 / np.tanh(r)
            return self.dsigma(r) / self.sigma(r)


@dataclass(frozen=True)
class Domain:
    """Radial domain [r_min, r_max] with end flags; None picks the natural flag."""
    r_min: float
    r_max: float
    left_kind: Optional[str] = None
    right_kind: Optional[str] = None


@dataclass(frozen=True)
class ModelManifold:
    n: int
    profile: WarpingProfile
    r_min: float
    r_max: float
    left_kind: str
    right_kind: str

    def __post_init__(self):
        flat = self.profile.kind == 'flat'
        if int(self.n) != self.n or self.n < (1 if flat else 2):
            raise GeometryError(f'Dimension must be an integer >= 2 (>= 1 for the flat line), got {self.n}.')
        if not self.r_max > self.r_min or (self.r_min < 0 and not flat):
            raise GeometryError(f'Need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}].')
        if self.left_kind not in LEFT_KINDS:
            raise GeometryError(f'left end must be one of {LEFT_KINDS}, got "{self.left_kind}".')
        if self.right_kind not in RIGHT_KINDS:
            raise GeometryError(f'right end must be one of {RIGHT_KINDS}, got "{self.right_kind}".')
        if self.left_kind == 'pole':
            if self.r_min != 0:
                raise GeometryError('A pole sits exactly at r_min = 0.')
            sigma0 = float(self.profile.sigma(0.0))
            dsigma0 = float(self.profile.dsigma(0.0))
            if abs(sigma0) > 1e-12:
                raise GeometryError(f'Pole flag needs sigma(0) = 0, the {self.profile.kind} profile has sigma(0) = {sigma0}.')
            if abs(dsigma0 - 1.0) > 1e-8:
                raise GeometryError(f'Pole flag needs sigma\'(0) = 1 (no cone point), got {dsigma0}.')
        elif self.r_min == 0 and abs(float(self.profile.sigma(0.0))) <= 1e-12:
            raise GeometryError('sigma vanishes at r_min = 0: flag the end as a pole or start at r_min > 0.')

    @property
    def omega(self):
        return sphere_area(self.n)

    @property
    def is_complete(self):
        """Pole at the left and a truncation standing for a noncompact end at the right."""
        return self.left_kind == 'pole' and self.right_kind == 'truncation'

    @property
    def has_finite_volume(self):
        return self.profile.kind == 'finite-volume' and self.n >= 3

    def area_density(self, r):
        return self.omega * self.profile.sigma(r) ** (self.n - 1)

    def log_area_density(self, r):
        return math.log(self.omega) + (self.n - 1) * self.profile.log_sigma(r)

    def describe(self):
        return {
            'n': self.n,
            'profile': self.profile.kind,
            'growth': self.profile.growth,
            'r_min': self.r_min,
            'r_max': self.r_max,
            'left_kind': self.left_kind,
            'right_kind': self.right_kind,
        }


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Uniform radial discretization of a model manifold (or of a window of one).

    w_half holds the half-node conduction of the Laplacian: the harmonic cell
    average h / int dr/S, which makes radial harmonic functions exactly
    discretely harmonic. The pole cell, where 1/S is not integrable, keeps the
    midpoint sample. Window ends cut inside the manifold are tagged 'cut'.
    """
    manifold: ModelManifold
    nodes: np.ndarray
    h: float
    s: np.ndarray
    s_half: np.ndarray
    w_half: np.ndarray
    mu: np.ndarray
    pole_volume: Optional[float]
    left_kind: str
    right_kind: str
    offset: int = 0

    @property
    def size(self):
        return self.nodes.size

    @property
    def r_min(self):
        return float(self.nodes[0])

    @property
    def r_max(self):
        return float(self.nodes[-1])

    @property
    def has_pole(self):
        return self.left_kind == 'pole'

    def volume(self):
        return float(self.mu.sum())

    def control_volumes(self):
        """Measure attached to each node by the strong operator (pole row uses the half cell)."""
        vol = self.mu.copy()
        if self.has_pole:
            vol[0] = self.pole_volume
        return vol

    def index_range(self, a=None, b=None):
        """Node indices (lo, hi) of the closed radial interval [a, b]."""
        slack = 1e-9 * self.h
        a = self.r_min if a is None else a
        b = self.r_max if b is None else b
        if b < a:
            raise PreconditionError(f'Empty region [{a}, {b}].')
        lo = int(np.searchsorted(self.nodes, a - slack, side='left'))
        hi = int(np.searchsorted(self.nodes, b + slack, side='right')) - 1
        if lo > hi:
            raise PreconditionError(f'Region [{a}, {b}] contains no grid node.')
        return lo, hi

    def region_weights(self, lo, hi):
        """Trapezoid weights of int over [r_lo, r_hi]: full cells inside, half cells at the region ends."""
        weights = self.h * self.s[lo:hi + 1].astype(float).copy()
        weights[0] *= 0.5
        weights[-1] *= 0.5
        if hi == lo:
            weights[:] = 0.0
        return weights

    def window(self, lo, hi):
        """Sub-grid on nodes lo..hi; ends that are not manifold ends become 'cut'."""
        if not (0 <= lo < hi < self.size) or hi - lo < 2:
            raise PreconditionError(f'Window [{lo}, {hi}] is not a valid sub-range of {self.size} nodes.')
        s = self.s[lo:hi + 1]
        mu = self.h * s
        mu[0] *= 0.5
        mu[-1] *= 0.5
        keeps_pole = lo == 0 and self.has_pole
        return RadialGrid(
            manifold=self.manifold,
            nodes=_frozen(self.nodes[lo:hi + 1]),
            h=self.h,
            s=_frozen(s),
            s_half=_frozen(self.s_half[lo:hi]),
            w_half=_frozen(self.w_half[lo:hi]),
            mu=_frozen(mu),
            pole_volume=self.pole_volume if keeps_pole else None,
            left_kind=self.left_kind if lo == 0 else 'cut',
            right_kind=self.right_kind if hi == self.size - 1 else 'cut',
            offset=self.offset + lo,
        )

    def window_between(self, a, b):
        lo, hi = self.index_range(a, b)
        return self.window(lo, hi)

    def contains(self, other):
        return (other.manifold is self.manifold and other.h == self.h
                and self.offset <= other.offset
                and other.offset + other.size <= self.offset + self.size)

    def describe(self):
        return {
            'nodes': self.size,
            'h': self.h,
            'r_min': self.r_min,
            'r_max': self.r_max,
            'left_kind': self.left_kind,
            'right_kind': self.right_kind,
        }


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _cell_quadrature(manifold, left, h, fn):
    """Gauss-Legendre integral of fn(S(r)) over each cell [left_i, left_i + h]."""
    points = left[:, None] + 0.5 * h * (1.0 + _GAUSS_X[None, :])
    values = fn(manifold.area_density(points))
    return 0.5 * h * values @ _GAUSS_W


def model_manifold(profile, n, domain):
    """ModelManifold for a Domain or an (r_min, r_max) pair, with unset end flags resolved."""
    if not isinstance(domain, Domain):
        domain = Domain(*domain)
    vanishes_at_zero = domain.r_min == 0 and abs(float(profile.sigma(0.0))) <= 1e-12
    left = domain.left_kind or ('pole' if vanishes_at_zero else 'open')
    right = domain.right_kind or ('boundary' if profile.kind == 'linear-cap' else 'truncation')
    return ModelManifold(n=n, profile=profile, r_min=float(domain.r_min), r_max=float(domain.r_max),
                         left_kind=left, right_kind=right)


def make_model(profile, n, domain, nodes):
    """
    Build a model manifold and its uniform radial grid with N = nodes.

    domain is a Domain or an (r_min, r_max) pair. Returns (ModelManifold, RadialGrid).
    """
    if nodes < 8:
        raise GeometryError(f'A radial grid needs at least 8 nodes, got {nodes}.')
    manifold = model_manifold(profile, n, domain)
    return manifold, build_grid(manifold, nodes)


def build_grid(manifold, nodes):
    r = np.linspace(manifold.r_min, manifold.r_max, nodes)
    h = (manifold.r_max - manifold.r_min) / (nodes - 1)
    half = r[:-1] + 0.5 * h

    sigma_nodes = manifold.profile.sigma(r)
    sigma_half = manifold.profile.sigma(half)
    inner = sigma_nodes[1:] if manifold.left_kind == 'pole' else sigma_nodes
    if np.any(inner <= 0) or np.any(sigma_half <= 0):
        bad = r[np.argmin(sigma_nodes)] if np.any(sigma_nodes <= 0) else half[np.argmin(sigma_half)]
        raise GeometryError(f'Warping function is not positive inside the domain (near r = {bad:.6g}).')

    with np.errstate(over='ignore'):
        s = manifold.area_density(r)
        s_half = manifold.area_density(half)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(s_half))):
        raise GeometryError('Area density overflows on this domain; shrink r_max for this profile.')

    w_half = h / _cell_quadrature(manifold, r[:-1], h, lambda dens: 1.0 / dens)
    pole_volume = None
    if manifold.left_kind == 'pole':
        w_half[0] = s_half[0]
        pole_volume = float(_cell_quadrature(manifold, r[:1], 0.5 * h, lambda dens: dens)[0])

    mu = h * s
    mu[0] *= 0.5
    mu[-1] *= 0.5
    logger.debug('Built %d-node grid on [%g, %g] for %s n=%d', nodes, manifold.r_min, manifold.r_max,
                 manifold.profile.kind, manifold.n)
    return RadialGrid(
        manifold=manifold, nodes=_frozen(r), h=float(h), s=_frozen(s), s_half=_frozen(s_half),
        w_half=_frozen(w_half), mu=_frozen(mu), pole_volume=pole_volume,
        left_kind=manifold.left_kind, right_kind=manifold.right_kind,
    )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples u_i of a function on a radial grid; immutable and finite."""
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise PreconditionError(f'Expected {self.grid.size} samples, got shape {values.shape}.')
        if not np.all(np.isfinite(values)):
            raise PreconditionError('Grid function samples must be finite.')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def sample(cls, grid, fn):
        return cls(grid, fn(grid.nodes))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.size, float(c)))

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def positive_part(self):
        return self.with_values(np.maximum(self.values, 0.0))

    def shifted(self, delta):
        """u_delta = u + delta."""
        return self.with_values(self.values + delta)

    def scaled(self, c):
        return self.with_values(c * self.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __add__(self, other):
        other_values = other.values if isinstance(other, GridFunction) else other
        return self.with_values(self.values + other_values)

    def __sub__(self, other):
        other_values = other.values if isinstance(other, GridFunction) else other
        return self.with_values(self.values - other_values)

    def sup_norm(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def restrict(self, window):
        """Samples on a window of this function's grid."""
        if not self.grid.contains(window):
            raise PreconditionError('Window is not a sub-grid of the function grid.')
        start = window.offset - self.grid.offset
        return GridFunction(window, self.values[start:start + window.size])


def annulus_norm(u, p, k):
    """(int_{B_2k \\ B_k} |u|^p)^(1/p) with trapezoid weights on [k, 2k]."""
    if not 1 <= p < math.inf:
        raise PreconditionError(f'annulus_norm needs 1 <= p < inf, got {p}.')
    grid = u.grid
    if 2 * k > grid.r_max + 1e-9 * grid.h:
        raise PreconditionError(f'Annulus [{k}, {2 * k}] leaves the truncated domain r <= {grid.r_max}.')
    lo, hi = grid.index_range(k, 2 * k)
    weights = grid.region_weights(lo, hi)
    return float(np.sum(np.abs(u.values[lo:hi + 1]) ** p * weights) ** (1.0 / p))


@dataclass(frozen=True)
class CompletenessIndicator:
    probe_radius: float
    integral: float
    tail_exponent: float
    verdict: str

    def as_dict(self):
        return {
            'probe_radius': self.probe_radius,
            'integral': self.integral,
            'tail_exponent': self.tail_exponent,
            'verdict': self.verdict,
        }


def _log_cell_integrals(log_s, h):
    """log int_cell S for S log-linear inside each cell (exact for exponential growth)."""
    a, b = log_s[:-1], log_s[1:]
    with np.errstate(invalid='ignore'):
        top = np.maximum(a, b)
        d = np.abs(b - a)
        factor = np.where(d > 1e-12, -np.expm1(-d) / np.where(d > 1e-12, d, 1.0), 1.0 - 0.5 * d)
        out = math.log(h) + top + np.log(factor)
    # A vanishing density at the pole falls back to the trapezoid cell.
    singular = ~np.isfinite(a)
    out[singular] = math.log(0.5 * h) + b[singular]
    return out


def volume_over_area(manifold, radius, nodes=20001):
    """Radii r and V(r)/S(r), V(r) = int_0^r S, computed in the log domain."""
    if manifold.left_kind != 'pole':
        raise PreconditionError('V/S is measured from a pole; punctured models have no centre.')
    r = np.linspace(0.0, radius, nodes)
    h = radius / (nodes - 1)
    with np.errstate(divide='ignore'):
        log_s = manifold.log_area_density(r)
    log_v = np.concatenate([[-np.inf], np.logaddexp.accumulate(_log_cell_integrals(log_s, h))])
    ratio = np.zeros_like(r)
    ratio[1:] = np.exp(log_v[1:] - log_s[1:])
    return r, ratio


def fit_power_tail(r, values):
    """Exponent beta of values ~ C r^(-beta) fitted on the outer half of the range."""
    mask = (r >= 0.5 * r[-1]) & (values > 0) & (r > 0)
    if mask.sum() < 2:
        return math.inf
    slope, _ = np.polyfit(np.log(r[mask]), np.log(values[mask]), 1)
    return float(-slope)


def stochastic_completeness_indicator(manifold, radius, nodes=20001, margin=0.25):
    """
    Partial integral int_1^R V/S dr and an advisory verdict from its tail.

    The tail exponent beta of V/S ~ r^(-beta) decides: beta < 1 - margin means a
    divergent integral (complete-like), beta > 1 + margin a convergent one
    (incomplete-like); anything in between is inconclusive.
    """
    if manifold.left_kind != 'pole':
        raise PreconditionError('Stochastic completeness indicator needs a pole; punctured models are rejected.')
    if radius > manifold.r_max + 1e-12:
        raise PreconditionError(f'Probe radius {radius} exceeds r_max = {manifold.r_max}.')
    r, ratio = volume_over_area(manifold, radius, nodes)
    outer = r >= 1.0
    integral = float(np.trapezoid(ratio[outer], r[outer])) if outer.sum() >= 2 else 0.0
    beta = fit_power_tail(r, ratio)
    if beta < 1.0 - margin:
        verdict = 'complete-like'
    elif beta > 1.0 + margin:
        verdict = 'incomplete-like'
    else:
        verdict = 'inconclusive'
    logger.debug('V/S tail exponent %.3f on [0, %g] -> %s', beta, radius, verdict)
    return CompletenessIndicator(probe_radius=float(radius), integral=integral, tail_exponent=beta, verdict=verdict)
