"""Sign-split logarithmic kernel, bilinear forms and HLS-type evaluators.

The kernel is handled through the elementary split
log(1/r) = log(1 + 1/r) - log(1 + r), giving the three bilinear forms
B1 (far part, log(1+|x-y|)), B2 (near part, log(1+1/|x-y|)) and
B0 = B2 - B1 (the full log kernel).

Two evaluation routes are kept deliberately independent:

* ``bilinear_direct`` -- O(N^2) double quadrature over node pairs, the
  oracle.  Diagonal (self-cell) entries integrate the kernel exactly over
  the cell pair against constant densities; radial grids use high-order
  graded angular panels for the ring-ring coupling.
* ``bilinear_fast``  -- zero-padded FFT convolution on uniform cartesian
  grids, precomputed (cached) ring-coupling matrices on radial grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft as spfft

from . import grids
from .errors import (DomainError, ExponentMismatchError,
                     NegativeInputError, UnsupportedGridError)


# ---------------------------------------------------------------------------
# kernel split
# ---------------------------------------------------------------------------

def kernel_split(r):
    """(near, far, total) with near = log(1+1/r), far = log(1+r),
    total = near - far = log(1/r)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kernel split is defined for r > 0")
    near = np.log1p(1.0 / r)
    far = np.log1p(r)
    total = near - far
    if near.ndim == 0:
        return float(near), float(far), float(total)
    return near, far, total


# ---------------------------------------------------------------------------
# exact diagonal (self-cell) kernel integrals, cartesian
# ---------------------------------------------------------------------------

def _gauss_panel(a, b, order=48):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def _moment_log_inv(k, R):
    """int_0^R r^k log(1/r) dr."""
    return R ** (k + 1) / (k + 1) ** 2 - R ** (k + 1) * np.log(R) / (k + 1)


def _moment_log1p(k, R):
    """int_0^R r^k log(1+r) dr for k = 1, 2, 3."""
    if k == 1:
        return 0.5 * (R**2 - 1.0) * np.log1p(R) - R**2 / 4.0 + R / 2.0
    if k == 2:
        return (R**3 / 3.0) * np.log1p(R) \
            - (R**3 / 3.0 - R**2 / 2.0 + R - np.log1p(R)) / 3.0
    if k == 3:
        return (R**4 / 4.0) * np.log1p(R) \
            - (R**4 / 4.0 - R**3 / 3.0 + R**2 / 2.0 - R + np.log1p(R)) / 4.0
    raise ValueError(k)


def _moment_power(k, R, mu):
    """int_0^R r^{k - mu} dr (mu < 2 keeps every exponent positive)."""
    return R ** (k + 1 - mu) / (k + 1 - mu)


def _cell_pair_average(h: float, moments) -> float:
    """(1/h^4) * double integral of K(x - y) over one cell pair.

    Uses the autocorrelation identity: the pair integral equals
    int_{[-h,h]^2} K(z) (h-|z1|)(h-|z2|) dz, reduced to a polar integral
    over [0, pi/4] whose radial moments are supplied in closed form.
    """
    theta, wt = _gauss_panel(0.0, np.pi / 4.0)
    R = h / np.cos(theta)
    c, s = np.cos(theta), np.sin(theta)
    integrand = (h**2 * moments(1, R) - h * (c + s) * moments(2, R)
                 + c * s * moments(3, R))
    return float(8.0 / h**4 * np.sum(wt * integrand))


def cell_average_log_kernels(h: float):
    """(avg log(1/|x-y|), avg log(1+|x-y|), avg log(1+1/|x-y|)) over a
    cell pair of a lattice with spacing h; the log singularity is integrable
    and handled in closed form."""
    d0 = _cell_pair_average(h, _moment_log_inv)
    d1 = _cell_pair_average(h, _moment_log1p)
    return d0, d1, d1 + d0


# ---------------------------------------------------------------------------
# cartesian route
# ---------------------------------------------------------------------------

def _kernel_tableaus(grid: grids.Grid):
    """(2n-1)^2 displacement tables of log(1+d) and log(1+1/d); the zero
    displacement holds the exact self-cell averages."""
    def build():
        n, h = grid.resolution, grid.spacing
        idx = np.arange(n, dtype=float)
        d = h * np.hypot(idx[:, None], idx[None, :])
        with np.errstate(divide="ignore"):
            q1 = np.log1p(d)
            q2 = np.log1p(1.0 / np.where(d > 0, d, 1.0))
        d0, d1, d2 = cell_average_log_kernels(h)
        q1[0, 0] = d1
        q2[0, 0] = d2
        tab1 = np.empty((2 * n - 1, 2 * n - 1))
        tab2 = np.empty((2 * n - 1, 2 * n - 1))
        sl = np.abs(np.arange(-(n - 1), n))
        tab1[:, :] = q1[sl[:, None], sl[None, :]]
        tab2[:, :] = q2[sl[:, None], sl[None, :]]
        return tab1, tab2
    return grid._cached("kernel_tableaus", build)


def _fft_kernels(grid: grids.Grid):
    """rfft2 of the zero-padded displacement tables, cached per grid."""
    def build():
        n = grid.resolution
        m = spfft.next_fast_len(2 * n - 1)
        tabs = _kernel_tableaus(grid)
        out = []
        for tab in tabs:
            pad = np.zeros((m, m))
            sl = np.arange(-(n - 1), n)
            pad[sl[:, None] % m, sl[None, :] % m] = tab
            out.append(spfft.rfft2(pad))
        return (m, *out)
    return grid._cached("fft_kernels", build)


def convolve_kernel(grid: grids.Grid, density: np.ndarray, which: str = "B0"):
    """(K * density) sampled at the nodes of a uniform cartesian grid,
    density given as nodal values (quadrature weights applied internally)."""
    if grid.kind != "cartesian":
        raise UnsupportedGridError("FFT convolution needs a cartesian grid")
    m, k1hat, k2hat = _fft_kernels(grid)
    n = grid.resolution
    pad = np.zeros((m, m))
    pad[:n, :n] = grid.weights * density
    dhat = spfft.rfft2(pad)
    if which == "B1":
        khat = k1hat
    elif which == "B2":
        khat = k2hat
    else:
        khat = k2hat - k1hat
    return spfft.irfft2(khat * dhat, s=(m, m))[:n, :n]


def _direct_cartesian(u: grids.GridField, v: grids.GridField):
    """Blocked O(N^2) pair sum; returns (b1, b2)."""
    grid = u.grid
    n, h = grid.resolution, grid.spacing
    xx, yy = grid.meshgrid()
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    a = (grid.weights * u.values).ravel()
    b = (grid.weights * v.values).ravel()
    d0, d1, d2 = cell_average_log_kernels(h)
    total = len(pts)
    b1 = b2 = 0.0
    block = max(1, 2**22 // total)
    for start in range(0, total, block):
        stop = min(start + block, total)
        dx = pts[start:stop, 0, None] - pts[None, :, 0]
        dy = pts[start:stop, 1, None] - pts[None, :, 1]
        d = np.hypot(dx, dy)
        diag = d == 0.0
        with np.errstate(divide="ignore"):
            k1 = np.log1p(d)
            k2 = np.log1p(1.0 / np.where(diag, 1.0, d))
        k1[diag] = d1
        k2[diag] = d2
        b1 += a[start:stop] @ (k1 @ b)
        b2 += a[start:stop] @ (k2 @ b)
    return b1, b2


# ---------------------------------------------------------------------------
# radial route: ring-ring couplings
# ---------------------------------------------------------------------------

_FAST_EDGES = np.pi * np.array([0.0, 1e-4, 1e-3, 1e-2, 0.06, 0.25, 0.6, 1.0])
_ORACLE_EDGES = np.pi * np.array([0.0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2,
                                  0.03, 0.1, 0.25, 0.45, 0.7, 1.0])


def _panel_nodes(edges, order):
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = _gauss_panel(a, b, order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _ring_log1p_block(r_block, r_all, theta, wt):
    """Angular average of log(1+|x-y|) between circles of radii r_block, r_all.

    The distance is evaluated as sqrt((r-s)^2 + 4 r s sin^2(theta/2)),
    stable near coincident radii.
    """
    diff = (r_block[:, None] - r_all[None, :]) ** 2
    prod = 4.0 * r_block[:, None] * r_all[None, :]
    sin2 = np.sin(theta / 2.0) ** 2
    acc = np.zeros(diff.shape)
    for t2, w in zip(sin2, wt):
        acc += w * np.log1p(np.sqrt(diff + prod * t2))
    return acc / np.pi


def ring_c0(grid: grids.Grid) -> np.ndarray:
    """Exact angular average of log(1/|x-y|) between circles: -log(max(r, s))."""
    if grid.kind != "radial":
        raise UnsupportedGridError("ring couplings need a radial grid")

    def build():
        r = grid.nodes
        return -np.log(np.maximum(r[:, None], r[None, :]))
    return grid._cached("ring_c0", build)


def ring_c1(grid: grids.Grid, oracle: bool = False) -> np.ndarray:
    """Angular average of log(1+|x-y|) between circles, by graded
    Gauss-Legendre panels.  The fast variant is cached on the grid; the
    oracle variant uses denser panels and is recomputed on demand."""
    if grid.kind != "radial":
        raise UnsupportedGridError("ring couplings need a radial grid")

    def build():
        edges, order = (_ORACLE_EDGES, 24) if oracle else (_FAST_EDGES, 12)
        theta, wt = _panel_nodes(edges, order)
        r = grid.nodes
        n = len(r)
        c1 = np.empty((n, n))
        block = max(1, 2**21 // (n * len(theta) // 16 + 1))
        for start in range(0, n, block):
            stop = min(start + block, n)
            c1[start:stop] = _ring_log1p_block(r[start:stop], r, theta, wt)
        return c1

    if oracle:
        return build()
    return grid._cached("ring_c1", build)


def ring_coupling_matrices(grid: grids.Grid, oracle: bool = False):
    """(C1, C0); the near-kernel coupling C2 is their sum."""
    return ring_c1(grid, oracle=oracle), ring_c0(grid)


def _radial_forms(u: grids.GridField, v: grids.GridField, oracle: bool):
    c1, c0 = ring_coupling_matrices(u.grid, oracle=oracle)
    a = u.grid.weights * u.values
    b = u.grid.weights * v.values
    b1 = float(a @ (c1 @ b))
    b2 = float(a @ ((c1 + c0) @ b))
    return b1, b2


def b0_form(u: grids.GridField, v: grids.GridField) -> float:
    """B0(u, v) alone, by the cheapest fast route: a single FFT convolution
    on cartesian grids, the exact -log(max) coupling on radial grids."""
    grids.require_same_grid(u, v)
    grid = u.grid
    if grid.kind == "cartesian":
        t0 = convolve_kernel(grid, v.values, "B0")
        return float(np.sum(grid.weights * u.values * t0))
    a = grid.weights * u.values
    b = grid.weights * v.values
    return float(a @ (ring_c0(grid) @ b))


# ---------------------------------------------------------------------------
# public bilinear forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelForm:
    """Evaluated bilinear forms: b1 (far), b2 (near), b0 = b2 - b1."""

    b1: float
    b2: float
    b0: float
    method: str
    error_vs_direct: Optional[float] = None

    def value(self, which: str) -> float:
        return {"B0": self.b0, "B1": self.b1, "B2": self.b2}[which]


def bilinear_direct(u: grids.GridField, v: grids.GridField,
                    which: str = "B0") -> KernelForm:
    """O(N^2) double quadrature over node pairs; the oracle route."""
    grids.require_same_grid(u, v)
    _check_which(which)
    if u.grid.kind == "cartesian":
        b1, b2 = _direct_cartesian(u, v)
    else:
        b1, b2 = _radial_forms(u, v, oracle=True)
    return KernelForm(b1=b1, b2=b2, b0=b2 - b1, method="direct")


def bilinear_fast(u: grids.GridField, v: grids.GridField,
                  which: str = "B0") -> KernelForm:
    """FFT convolution (cartesian) or cached ring couplings (radial)."""
    grids.require_same_grid(u, v)
    _check_which(which)
    grid = u.grid
    if grid.kind == "cartesian":
        t1 = convolve_kernel(grid, v.values, "B1")
        t2 = convolve_kernel(grid, v.values, "B2")
        a = grid.weights * u.values
        b1 = float(np.sum(a * t1))
        b2 = float(np.sum(a * t2))
    else:
        b1, b2 = _radial_forms(u, v, oracle=False)
    return KernelForm(b1=b1, b2=b2, b0=b2 - b1, method="fast")


def _check_which(which: str):
    if which not in ("B0", "B1", "B2"):
        raise DomainError(f"unknown form selector {which!r}")


# ---------------------------------------------------------------------------
# HLS-type inequality evaluators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HLSReport:
    lhs: float
    norm_product: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.norm_product if self.norm_product else float("nan")


def hls_check(u: grids.GridField, v: grids.GridField, mu: float,
              s: float, r: float) -> HLSReport:
    """Evaluate both sides of the Riesz-kernel inequality
    int int |x-y|^{-mu} u(x) v(y) <= C(s, 2, mu, r) ||u||_s ||v||_r."""
    grids.require_same_grid(u, v)
    if not (0.0 < mu < 2.0) or s <= 1.0 or r <= 1.0:
        raise ExponentMismatchError("need 0 < mu < 2 and s, r > 1")
    if abs(1.0 / s + mu / 2.0 + 1.0 / r - 2.0) > 1e-12:
        raise ExponentMismatchError("exponents must satisfy 1/s + mu/2 + 1/r = 2")
    grid = u.grid
    if grid.kind != "cartesian":
        raise UnsupportedGridError("hls_check runs on cartesian grids")
    h = grid.spacing
    diag = _cell_pair_average(h, lambda k, R: _moment_power(k, R, mu))
    xx, yy = grid.meshgrid()
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    a = (grid.weights * u.values).ravel()
    b = (grid.weights * v.values).ravel()
    total = len(pts)
    lhs = 0.0
    block = max(1, 2**22 // total)
    for start in range(0, total, block):
        stop = min(start + block, total)
        dx = pts[start:stop, 0, None] - pts[None, :, 0]
        dy = pts[start:stop, 1, None] - pts[None, :, 1]
        d = np.hypot(dx, dy)
        zero = d == 0.0
        kern = np.where(zero, diag, np.where(d > 0, d, 1.0) ** (-mu))
        lhs += a[start:stop] @ (kern @ b)
    norm_u = grids.integrate(u, lambda t: np.abs(t) ** s) ** (1.0 / s)
    norm_v = grids.integrate(v, lambda t: np.abs(t) ** r) ** (1.0 / r)
    return HLSReport(lhs=float(lhs), norm_product=norm_u * norm_v)


@dataclass(frozen=True)
class LogHLSReport:
    lhs: float                 # 2 N * B0(u, v), N = 2
    entropy_u: float
    entropy_v: float
    weight_moment_u: float
    weight_moment_v: float
    c_n_required: float        # lhs - entropy_u - entropy_v
    normalization_u: float     # L1 mass before auto-normalization
    normalization_v: float


def log_hls_check(u: grids.GridField, v: grids.GridField) -> LogHLSReport:
    """Evaluate the logarithmic HLS inequality data for nonnegative unit-mass
    densities; inputs are auto-normalized and the residual constant needed to
    satisfy the inequality is reported."""
    grids.require_same_grid(u, v)
    if np.min(u.values) < -1e-12 or np.min(v.values) < -1e-12:
        raise NegativeInputError("log-HLS needs nonnegative densities")
    uu = np.maximum(u.values, 0.0)
    vv = np.maximum(v.values, 0.0)
    mass_u = float(np.sum(u.grid.weights * uu))
    mass_v = float(np.sum(u.grid.weights * vv))
    if mass_u <= 0 or mass_v <= 0:
        raise NegativeInputError("log-HLS needs nonzero densities")
    un = grids.GridField(u.grid, uu / mass_u)
    vn = grids.GridField(u.grid, vv / mass_v)
    form = bilinear_fast(un, vn, "B0")
    lhs = 4.0 * form.b0

    def xlogx(t):
        tt = np.maximum(t, 1e-300)
        return np.where(t > 0, t * np.log(tt), 0.0)

    w = np.log1p(u.grid.radii())
    ent_u = grids.integrate(un, xlogx)
    ent_v = grids.integrate(vn, xlogx)
    mom_u = grids.integrate(un, weight=w)
    mom_v = grids.integrate(vn, weight=w)
    return LogHLSReport(
        lhs=lhs, entropy_u=ent_u, entropy_v=ent_v,
        weight_moment_u=mom_u, weight_moment_v=mom_v,
        c_n_required=lhs - ent_u - ent_v,
        normalization_u=mass_u, normalization_v=mass_v,
    )
