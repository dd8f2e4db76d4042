"""Radial shell grids, quadrature, finite differences, and discrete norms.

Everything downstream works on scalar profiles f(r) over a truncated shell
[R, R_max].  Volume integrals carry the 4*pi*r^2 measure; the quadrature is a
trapezoid rule in the volume coordinate r^3/3, which integrates constants
exactly and is second-order for smooth integrands.  Radial vector fields
u(r)*rhat are stored as their scalar radial component; the angular metric
terms (the 2*(u/r)^2 family) are added inside the norm routines, never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class FluidParams:
    """Physical constants of the gas: adiabatic exponent, viscosities, slip
    friction, and the far-field density the flow relaxes to.

    ``lambda_`` is the second viscosity; ``mu > 0`` and
    ``lambda_ + 2*mu/3 >= 0`` are required.  ``alpha`` is the boundary slip
    friction; it does not enter the radial dynamics (a radial velocity field
    has no tangential component at the inner sphere) and is recorded only so
    configurations are complete.
    """

    gamma: float
    mu: float
    lambda_: float
    alpha: float = 0.0
    c_star: float = 1.0

    def __post_init__(self):
        vals = (self.gamma, self.mu, self.lambda_, self.alpha, self.c_star)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError("fluid parameters must be finite")
        if self.gamma < 1.0:
            raise ParameterError(f"gamma must be >= 1, got {self.gamma}")
        if self.mu <= 0.0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")
        if self.lambda_ + 2.0 * self.mu / 3.0 < 0.0:
            raise ParameterError("viscosity condition lambda + 2*mu/3 >= 0 violated")
        if self.c_star <= 0.0:
            raise ParameterError(f"c_star must be > 0, got {self.c_star}")

    @property
    def longitudinal_viscosity(self) -> float:
        """Coefficient 2*mu + lambda acting on grad(div u) in the radial reduction."""
        return 2.0 * self.mu + self.lambda_

    def sound_speed(self, rho):
        """Adiabatic sound speed sqrt(gamma * rho**(gamma-1))."""
        return np.sqrt(self.gamma * np.power(rho, self.gamma - 1.0))

    def enthalpy_weight(self, rho):
        """h'(rho) = p'(rho)/rho = gamma * rho**(gamma-2); pressure linearization weight."""
        return self.gamma * np.power(rho, self.gamma - 2.0)

    def enthalpy(self, rho):
        """Enthalpy h with h'(s) = p'(s)/s; log branch at gamma = 1."""
        if self.gamma == 1.0:
            return np.log(rho)
        return (self.gamma / (self.gamma - 1.0)) * np.power(rho, self.gamma - 1.0)

    def enthalpy_increment(self, rho_base, q):
        """h(rho_base + q) - h(rho_base), evaluated without cancellation.

        The naive difference loses ~|log10 q| digits for small perturbations;
        the expm1/log1p form is exact at q = 0 and accurate uniformly in q.
        """
        ratio = np.log1p(q / rho_base)
        if self.gamma == 1.0:
            return ratio
        return (self.gamma / (self.gamma - 1.0)) \
            * np.power(rho_base, self.gamma - 1.0) \
            * np.expm1((self.gamma - 1.0) * ratio)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes r_0 = R < ... < r_N = R_max with positive quadrature weights.

    ``weights[i]`` realizes the integral of f * 4*pi*r^2 dr; the rule is exact
    for f == 1 (weights sum to the shell volume to machine precision).
    """

    r: np.ndarray
    weights: np.ndarray
    uniform: bool
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        w = np.array(self.weights, dtype=float)
        if r.ndim != 1 or r.size < 3 or w.shape != r.shape:
            raise ParameterError("grid needs matching 1-D node and weight arrays")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(w))):
            raise ParameterError("grid nodes and weights must be finite")
        if np.any(np.diff(r) <= 0.0):
            raise ParameterError("grid nodes must be strictly increasing")
        if np.any(w <= 0.0):
            raise ParameterError("quadrature weights must be positive")
        r.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self) -> int:
        return self.r.size

    @property
    def r_inner(self) -> float:
        return float(self.r[0])

    @property
    def r_outer(self) -> float:
        return float(self.r[-1])

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.r)))

    def field(self, values) -> "RadialField":
        return RadialField(values, self)

    def zeros(self) -> "RadialField":
        return RadialField(np.zeros(self.n_nodes), self)


@dataclass(frozen=True, eq=False)
class RadialField:
    """One scalar value per grid node; immutable after construction."""

    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ParameterError(
                f"field length {vals.shape} does not match grid ({self.grid.n_nodes},)"
            )
        if not np.all(np.isfinite(vals)):
            raise ParameterError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def build_radial_grid(r_inner: float, r_outer: float, n_cells: int,
                      stretch: float = 0.0) -> RadialGrid:
    """Build a shell grid with n_cells intervals (n_cells + 1 nodes).

    ``stretch == 0`` gives uniform spacing.  ``stretch > 0`` gives a geometric
    progression clustered near the inner radius: the cell widths grow by a
    constant ratio chosen so that the last cell is exp(stretch) times wider
    than the first.
    """
    for name, v in (("r_inner", r_inner), ("r_outer", r_outer), ("stretch", stretch)):
        if not math.isfinite(v):
            raise ParameterError(f"{name} must be finite")
    if r_inner <= 0.0:
        raise ParameterError(f"r_inner must be > 0, got {r_inner}")
    if r_outer <= r_inner:
        raise ParameterError(f"r_outer must exceed r_inner, got [{r_inner}, {r_outer}]")
    if n_cells < 8:
        raise ParameterError(f"n_cells must be >= 8, got {n_cells}")
    if stretch < 0.0:
        raise ParameterError(f"stretch must be >= 0, got {stretch}")

    n = int(n_cells)
    if stretch == 0.0:
        r = np.linspace(r_inner, r_outer, n + 1)
        uniform = True
    else:
        ratio = math.exp(stretch / (n - 1))
        # first width from the geometric-series sum h0*(ratio^n - 1)/(ratio - 1)
        h0 = (r_outer - r_inner) * (ratio - 1.0) / (ratio**n - 1.0)
        widths = h0 * ratio ** np.arange(n)
        r = r_inner + np.concatenate(([0.0], np.cumsum(widths)))
        r[-1] = r_outer
        uniform = False

    cubes = r**3
    w = np.empty_like(r)
    w[1:-1] = (cubes[2:] - cubes[:-2]) / 6.0
    w[0] = (cubes[1] - cubes[0]) / 6.0
    w[-1] = (cubes[-1] - cubes[-2]) / 6.0
    w *= FOUR_PI
    return RadialGrid(r=r, weights=w, uniform=uniform)


def _fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at z on nodes x."""
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _stencil_window(i: int, n: int, order: int, uniform: bool) -> tuple[int, int]:
    """Node window [lo, hi) for the derivative stencil at node i.

    Interior stencils are centered; end stencils are one-sided with enough
    points for second-order accuracy (a one-sided second derivative needs
    four points, as does the second derivative on a non-uniform grid).
    """
    if order == 1:
        size = 3
        lo = i - 1
    elif order == 2:
        if uniform and 1 <= i <= n - 2:
            size = 3
            lo = i - 1
        else:
            size = 4
            lo = i - 2 if i >= 2 else i - 1
    else:
        size = 5
        lo = i - 2
    lo = max(0, min(lo, n - size))
    return lo, lo + size


def _derivative_matrix(grid: RadialGrid, order: int) -> sp.csr_matrix:
    key = ("deriv", order)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    r = grid.r
    n = r.size
    min_nodes = {1: 3, 2: 4, 3: 5}[order]
    if n < min_nodes:
        raise ParameterError(f"grid too small for derivative order {order}")
    rows, cols, vals = [], [], []
    for i in range(n):
        lo, hi = _stencil_window(i, n, order, grid.uniform)
        w = _fornberg_weights(r[i], r[lo:hi], order)
        rows.extend([i] * (hi - lo))
        cols.extend(range(lo, hi))
        vals.extend(w.tolist())
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    grid._cache[key] = mat
    return mat


def radial_derivative(f: RadialField, order: int) -> RadialField:
    """Finite-difference derivative of formal order 2: centered in the
    interior, one-sided at both ends."""
    if order not in (1, 2, 3):
        raise ParameterError(f"derivative order must be 1, 2 or 3, got {order}")
    if f.grid.n_nodes < order + 2:
        raise ParameterError("grid has too few nodes for this derivative order")
    mat = _derivative_matrix(f.grid, order)
    return RadialField(mat @ f.values, f.grid)


def integrate(f: RadialField) -> float:
    """Discrete integral of f over the shell with the 4*pi*r^2 measure."""
    return float(np.dot(f.grid.weights, f.values))


def weighted_l2_norm(f: RadialField) -> float:
    """Discrete L2 norm sqrt(sum w_i f_i^2)."""
    return math.sqrt(float(np.dot(f.grid.weights, f.values**2)))


def _wsq(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.dot(grid.weights, values**2))


def sobolev_norm(f: RadialField, k: int) -> float:
    """Discrete H^k norm of a scalar profile: sqrt of the summed squared L2
    norms of the radial derivatives of orders 0..k."""
    if k not in (0, 1, 2, 3):
        raise ParameterError(f"Sobolev order must be in 0..3, got {k}")
    total = _wsq(f.grid, f.values)
    for j in range(1, k + 1):
        total += _wsq(f.grid, radial_derivative(f, j).values)
    return math.sqrt(total)


def _vector_grad_term(u: RadialField, j: int) -> float:
    """Squared L2 size of the j-th derivative of the gradient of u(r)*rhat.

    The gradient of a radial vector field has the two scalar channels u' and
    u/r (the latter with multiplicity two); higher derivatives differentiate
    each channel radially.
    """
    grid = u.grid
    total = _wsq(grid, radial_derivative(u, j + 1).values)
    over_r = RadialField(u.values / grid.r, grid)
    if j == 0:
        total += 2.0 * _wsq(grid, over_r.values)
    else:
        total += 2.0 * _wsq(grid, radial_derivative(over_r, j).values)
    return total


def vector_sobolev_norm(u: RadialField, k: int) -> float:
    """Discrete H^k norm of the radial vector field u(r)*rhat, including the
    angular metric contributions (|grad u|^2 = u'^2 + 2 (u/r)^2 and its
    radial derivatives)."""
    if k not in (0, 1, 2, 3):
        raise ParameterError(f"Sobolev order must be in 0..3, got {k}")
    total = _wsq(u.grid, u.values)
    for j in range(k):
        total += _vector_grad_term(u, j)
    return math.sqrt(total)


def vector_gradient_sobolev_norm(u: RadialField, k: int) -> float:
    """Discrete H^k norm of grad(u(r)*rhat) as an object in its own right:
    sqrt(sum_{j=0..k} ||d^j grad u||^2)."""
    if k not in (0, 1, 2):
        raise ParameterError(f"gradient Sobolev order must be in 0..2, got {k}")
    total = 0.0
    for j in range(k + 1):
        total += _vector_grad_term(u, j)
    return math.sqrt(total)


def vector_gradient_norm(u: RadialField) -> float:
    """L2 norm of grad(u(r)*rhat): sqrt(int (u'^2 + 2 (u/r)^2))."""
    return math.sqrt(_vector_grad_term(u, 0))


def vector_hessian_norm(u: RadialField) -> float:
    """L2 norm of the full second gradient of the radial vector field u(r)*rhat.

    With a = u' - u/r and b = u/r, the nine-index contraction reduces to
    |grad^2 u|^2 = a'^2 + 4 (a/r)^2 + 3 b'^2 + 2 a' b'.
    """
    grid = u.grid
    r = grid.r
    up = radial_derivative(u, 1).values
    b = u.values / r
    a = up - b
    ap = radial_derivative(RadialField(a, grid), 1).values
    bp = radial_derivative(RadialField(b, grid), 1).values
    dens = ap**2 + 4.0 * (a / r) ** 2 + 3.0 * bp**2 + 2.0 * ap * bp
    return math.sqrt(float(np.dot(grid.weights, dens)))
