"""Discretization of the truncated plane and of radial profiles.

Two grid kinds are provided:

* ``radial`` -- nodes on (0, R] with a geometric distribution near the
  origin (first node at R/(10 n)) so that logarithmic kernels and Moser
  plateaus are resolved.  Quadrature weights integrate the piecewise
  parabolic interpolant against the measure 2*pi*r dr, hence polynomials
  of degree <= 2 in r are integrated exactly.
* ``cartesian`` -- an n x n lattice of cell centers on [-R, R]^2 whose
  cells are clipped to the disc |x| <= R by exact area-fraction weights.

All operations are pure functions of immutable inputs; the node and
weight arrays are marked read-only after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError, InvalidParameterError, ResolutionFailureError

MIN_RESOLUTION = 8


@dataclass(frozen=True, eq=False)
class Grid:
    """A truncated planar (cartesian) or radial grid with quadrature weights."""

    kind: str
    domain_radius: float
    resolution: int
    nodes: np.ndarray      # radial: (n,) radii; cartesian: (n,) axis of cell centers
    weights: np.ndarray    # radial: (n,); cartesian: (n, n) clipped cell areas
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.nodes.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def shape(self):
        if self.kind == "radial":
            return (self.resolution,)
        return (self.resolution, self.resolution)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> float:
        """Cell size (cartesian) or mean node gap (radial)."""
        if self.kind == "cartesian":
            return 2.0 * self.domain_radius / self.resolution
        return float(np.mean(np.diff(self.nodes)))

    def radii(self) -> np.ndarray:
        """Distance of every node from the origin, in grid shape."""
        if self.kind == "radial":
            return self.nodes
        return self._cached("radii", lambda: np.hypot(*self.meshgrid()))

    def meshgrid(self):
        if self.kind != "cartesian":
            raise GridMismatchError("meshgrid is only defined for cartesian grids")
        return np.meshgrid(self.nodes, self.nodes, indexing="ij")

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class GridField:
    """A scalar field sampled at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("field values must be finite")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.grid, values)


def build_grid(kind: str, domain_radius: float, resolution: int,
               anchors: tuple = ()) -> Grid:
    """Construct a grid over the disc of radius ``domain_radius``.

    ``anchors`` (radial grids only) is a tuple of radii in (0, R) that are
    snapped onto exact nodes; used to align nodes with profile corners.
    """
    if domain_radius <= 0:
        raise InvalidParameterError(f"domain_radius must be positive, got {domain_radius}")
    if resolution < MIN_RESOLUTION:
        raise InvalidParameterError(
            f"resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )
    if kind == "radial":
        return _build_radial(float(domain_radius), int(resolution), tuple(anchors))
    if kind == "cartesian":
        if anchors:
            raise InvalidParameterError("anchors are supported on radial grids only")
        return _build_cartesian(float(domain_radius), int(resolution))
    raise InvalidParameterError(f"unknown grid kind {kind!r}")


# ---------------------------------------------------------------------------
# radial grids
# ---------------------------------------------------------------------------

def _build_radial(radius: float, n: int, anchors: tuple) -> Grid:
    r0 = radius / (10.0 * n)
    nodes = np.geomspace(r0, radius, n)
    nodes[-1] = radius
    for a in anchors:
        if not 0.0 < a < radius:
            raise InvalidParameterError(f"anchor {a} outside (0, R)")
        i = int(np.argmin(np.abs(nodes - a)))
        if abs(nodes[i] - a) <= 1e-14 * a:
            continue   # already a node
        i = min(max(i, 1), n - 2)   # keep first node and the boundary intact
        nodes[i] = a
    nodes = np.unique(nodes)
    if len(nodes) != n:
        raise InvalidParameterError("anchor snapping produced duplicate nodes")
    weights = _radial_weights(nodes)
    if np.any(weights <= 0):
        raise InvalidParameterError("radial quadrature produced non-positive weights")
    return Grid("radial", radius, n, nodes, weights)


def _ring_moments(a, b):
    """(m0, m1, m2) with m_k = int_a^b r^k * 2 pi r dr."""
    two_pi = 2.0 * np.pi
    m0 = two_pi * (b**2 - a**2) / 2.0
    m1 = two_pi * (b**3 - a**3) / 3.0
    m2 = two_pi * (b**4 - a**4) / 4.0
    return m0, m1, m2


def _parabola_weights(x, a, b):
    """Weights for the 3 nodes ``x`` of the interpolating parabola on [a, b]."""
    m0, m1, m2 = _ring_moments(a, b)
    w = np.empty(3)
    for j in range(3):
        xi, xk = np.delete(x, j)
        w[j] = (m2 - (xi + xk) * m1 + xi * xk * m0) / ((x[j] - xi) * (x[j] - xk))
    return w


def _linear_weights(a, b):
    """Weights for the endpoint nodes of the linear interpolant on [a, b]."""
    h = b - a
    return np.array([np.pi * h * (b + 2 * a) / 3.0, np.pi * h * (2 * b + a) / 3.0])


def _radial_weights(nodes: np.ndarray) -> np.ndarray:
    """Composite parabolic quadrature of the 2 pi r dr measure on [0, R].

    Segment pairs get the Simpson-style parabolic rule; an odd trailing
    segment reuses the last parabola; the gap [0, r_0] treats the field as
    constant (radial profiles are flat at the origin), which keeps every
    weight positive at the cost of an O(r_0^3) defect.
    """
    n = len(nodes)
    w = np.zeros(n)
    i = 0
    while i + 2 <= n - 1:
        pw = _parabola_weights(nodes[i:i + 3], nodes[i], nodes[i + 2])
        if np.any(pw < 0):   # badly skewed triple (anchor snapping): split linearly
            w[i:i + 2] += _linear_weights(nodes[i], nodes[i + 1])
            w[i + 1:i + 3] += _linear_weights(nodes[i + 1], nodes[i + 2])
        else:
            w[i:i + 3] += pw
        i += 2
    if i == n - 2:          # odd segment count: last parabola on final segment
        pw = _parabola_weights(nodes[n - 3:n], nodes[n - 2], nodes[n - 1])
        if pw[0] < -1e-3 * abs(pw).max():
            w[n - 2:n] += _linear_weights(nodes[n - 2], nodes[n - 1])
        else:
            w[n - 3:n] += pw
    w[0] += np.pi * nodes[0] ** 2
    return w


# ---------------------------------------------------------------------------
# cartesian grids
# ---------------------------------------------------------------------------

def _build_cartesian(radius: float, n: int) -> Grid:
    h = 2.0 * radius / n
    axis = -radius + (np.arange(n) + 0.5) * h
    edges = -radius + np.arange(n + 1) * h
    weights = _disc_cell_areas(radius, edges)
    return Grid("cartesian", radius, n, axis, weights)


def _quadrant_area(x, y, radius):
    """Area of {0<=u<=x, 0<=v<=y} inside the disc of given radius (x, y >= 0)."""
    x = np.minimum(x, radius)
    y = np.minimum(y, radius)
    inside = x**2 + y**2 <= radius**2
    ustar = np.sqrt(np.maximum(radius**2 - y**2, 0.0))

    def antideriv(u):
        u = np.clip(u, 0.0, radius)
        return 0.5 * (u * np.sqrt(np.maximum(radius**2 - u**2, 0.0))
                      + radius**2 * np.arcsin(u / radius))

    crossed = y * ustar + antideriv(x) - antideriv(ustar)
    return np.where(inside, x * y, np.where(x <= ustar, x * y, crossed))


def _signed_quadrant_area(x, y, radius):
    return np.sign(x) * np.sign(y) * _quadrant_area(np.abs(x), np.abs(y), radius)


def _disc_cell_areas(radius: float, edges: np.ndarray) -> np.ndarray:
    """Exact area of (cell intersect disc) for every cell of the lattice."""
    x0, x1 = edges[:-1][:, None], edges[1:][:, None]
    y0, y1 = edges[:-1][None, :], edges[1:][None, :]
    area = (_signed_quadrant_area(x1, y1, radius)
            - _signed_quadrant_area(x0, y1, radius)
            - _signed_quadrant_area(x1, y0, radius)
            + _signed_quadrant_area(x0, y0, radius))
    return np.maximum(area, 0.0)


# ---------------------------------------------------------------------------
# field constructors
# ---------------------------------------------------------------------------

def field_from_radial(grid: Grid, profile) -> GridField:
    """Sample ``profile(r)`` at the node radii of either grid kind."""
    return GridField(grid, np.asarray(profile(grid.radii()), dtype=float))


def field_from_xy(grid: Grid, fn) -> GridField:
    """Sample ``fn(x, y)`` on a cartesian grid."""
    if grid.kind != "cartesian":
        raise GridMismatchError("field_from_xy requires a cartesian grid")
    xx, yy = grid.meshgrid()
    return GridField(grid, np.asarray(fn(xx, yy), dtype=float))


def zero_field(grid: Grid) -> GridField:
    return GridField(grid, np.zeros(grid.shape))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def integrate(u: GridField, pointwise_map=None, weight=None) -> float:
    """Return sum_i w_i * map(u_i) * weight_i over the truncated domain."""
    values = u.values if pointwise_map is None else pointwise_map(u.values)
    if weight is not None:
        if isinstance(weight, GridField):
            if weight.grid is not u.grid:
                raise GridMismatchError("weight lives on a different grid")
            weight = weight.values
        elif np.shape(weight) != u.grid.shape:
            raise GridMismatchError("weight array does not match the grid shape")
        values = values * weight
    return float(np.sum(u.grid.weights * values))


# ---------------------------------------------------------------------------
# finite differences and Dirichlet energy
# ---------------------------------------------------------------------------

def _stencil_row(x, j):
    """First-derivative weights at x[j] from the quadratic through 3 nodes.

    The coefficient at x[j] is the negative sum of the others so that
    constants differentiate to exactly zero in floating point.
    """
    x0, x1, x2 = x
    h1, h2 = x1 - x0, x2 - x1
    if j == 0:
        others = np.array([(h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))])
        return np.array([-others.sum(), others[0], others[1]])
    if j == 1:
        others = np.array([-h2 / (h1 * (h1 + h2)), h1 / (h2 * (h1 + h2))])
        return np.array([others[0], -others.sum(), others[1]])
    others = np.array([h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2)])
    return np.array([others[0], others[1], -others.sum()])


def _radial_derivative_matrix(nodes: np.ndarray) -> sp.csr_matrix:
    n = len(nodes)
    rows, cols, vals = [], [], []
    for i in range(n):
        base = min(max(i - 1, 0), n - 3)
        coeffs = _stencil_row(nodes[base:base + 3], i - base)
        rows.extend([i, i, i])
        cols.extend([base, base + 1, base + 2])
        vals.extend(coeffs)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _axis_derivative_matrix(n: int, h: float) -> sp.csr_matrix:
    """Second-order central differences, one-sided second order at the ends."""
    d = sp.lil_matrix((n, n))
    inv = 1.0 / (2.0 * h)
    for i in range(1, n - 1):
        d[i, i - 1] = -inv
        d[i, i + 1] = inv
    d[0, 0], d[0, 1], d[0, 2] = -3 * inv, 4 * inv, -inv
    d[n - 1, n - 1], d[n - 1, n - 2], d[n - 1, n - 3] = 3 * inv, -4 * inv, inv
    return d.tocsr()


def gradient_operators(grid: Grid):
    """Sparse derivative operators acting on flattened field values."""
    def build():
        if grid.kind == "radial":
            return (_radial_derivative_matrix(grid.nodes),)
        n, h = grid.resolution, grid.spacing
        d1 = _axis_derivative_matrix(n, h)
        eye = sp.identity(n, format="csr")
        return (sp.kron(d1, eye, format="csr"), sp.kron(eye, d1, format="csr"))
    return grid._cached("gradient_ops", build)


def stiffness_matrix(grid: Grid) -> sp.csr_matrix:
    """Quadratic form of the Dirichlet energy: E(u) = u^T A u."""
    def build():
        w = sp.diags(grid.weights.ravel())
        ops = gradient_operators(grid)
        a = ops[0].T @ w @ ops[0]
        for op in ops[1:]:
            a = a + op.T @ w @ op
        return a.tocsr()
    return grid._cached("stiffness", build)


def gradient_values(u: GridField):
    """Nodal first derivatives: (du/dr,) on radial, (du/dx, du/dy) on cartesian."""
    flat = u.values.ravel()
    return tuple((op @ flat).reshape(u.grid.shape) for op in gradient_operators(u.grid))


def dirichlet_energy(u: GridField) -> float:
    """Quadrature of |grad u|^2 over the truncated domain (radial: (u')^2 2 pi r dr)."""
    if u.grid.num_nodes < 3:
        raise GridMismatchError("grid too small for finite differences")
    flat = u.values.ravel()
    return float(flat @ (stiffness_matrix(u.grid) @ flat))


def require_same_grid(u: GridField, v: GridField):
    if u.grid is not v.grid:
        raise GridMismatchError("fields live on different grids")


def require_plateau_resolution(grid: Grid, radius: float, min_nodes: int = 4):
    """Fail unless at least ``min_nodes`` nodes fall inside |x| <= radius."""
    count = int(np.sum(grid.radii() <= radius))
    if count < min_nodes:
        raise ResolutionFailureError(
            f"grid has {count} node(s) inside radius {radius}; needs >= {min_nodes}"
        )
