"""Grid construction, quadrature and Dirichlet-energy checks."""

import numpy as np
import pytest

from logchoquard import grids
from logchoquard.errors import GridMismatchError, InvalidParameterError


def test_cartesian_weights_sum_to_disc_area():
    g = grids.build_grid("cartesian", 1.0, 16)
    assert abs(np.sum(g.weights) - np.pi) < 1e-10 * np.pi


def test_radial_weights_sum_to_disc_area():
    g = grids.build_grid("radial", 10.0, 2048)
    assert abs(np.sum(g.weights) - 100 * np.pi) < 1e-10 * 100 * np.pi


def test_radial_weights_positive():
    g = grids.build_grid("radial", 20.0, 512, anchors=(0.5 / 32, 0.5))
    assert np.all(g.weights > 0)
    assert 0.5 in g.nodes and 0.5 / 32 in g.nodes


def test_small_resolution_rejected():
    with pytest.raises(InvalidParameterError):
        grids.build_grid("radial", 10.0, 4)
    with pytest.raises(InvalidParameterError):
        grids.build_grid("cartesian", -1.0, 16)


def test_integrate_constant_field():
    g = grids.build_grid("cartesian", 2.0, 64)
    u = grids.GridField(g, np.ones(g.shape))
    assert abs(grids.integrate(u) - 4 * np.pi) < 1e-8


def test_integrate_zero_field_with_map():
    g = grids.build_grid("radial", 5.0, 64)
    u = grids.zero_field(g)
    assert grids.integrate(u, pointwise_map=lambda s: np.expm1(s)) == 0.0


def test_integrate_gaussian_radial():
    # int e^{-r^2} dx = pi (1 - e^{-R^2}) ~= pi at R = 10
    g = grids.build_grid("radial", 10.0, 2048)
    u = grids.field_from_radial(g, lambda r: np.exp(-r**2))
    assert abs(grids.integrate(u) - np.pi) < 1e-6


def test_quadrature_exact_for_linear_radial():
    g = grids.build_grid("radial", 7.0, 256)
    u = grids.field_from_radial(g, lambda r: 3.0 - 0.25 * r)
    exact = 3.0 * np.pi * 49 - 0.25 * 2 * np.pi * 7.0**3 / 3.0
    assert abs(grids.integrate(u) - exact) < 1e-9 * abs(exact)


def test_integrate_linearity():
    g = grids.build_grid("radial", 5.0, 128)
    rng = np.random.default_rng(3)
    u = grids.GridField(g, rng.normal(size=g.shape))
    v = grids.GridField(g, rng.normal(size=g.shape))
    a, b = 1.7, -0.3
    combo = grids.GridField(g, a * u.values + b * v.values)
    lhs = grids.integrate(combo)
    rhs = a * grids.integrate(u) + b * grids.integrate(v)
    assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs))


def test_grid_mismatch_weight():
    g1 = grids.build_grid("radial", 5.0, 64)
    g2 = grids.build_grid("radial", 5.0, 64)
    u = grids.zero_field(g1)
    w = grids.zero_field(g2)
    with pytest.raises(GridMismatchError):
        grids.integrate(u, weight=w)


def test_dirichlet_constant_is_zero():
    g = grids.build_grid("radial", 10.0, 256)
    u = grids.GridField(g, np.full(g.shape, 2.5))
    assert abs(grids.dirichlet_energy(u)) < 1e-9


def test_dirichlet_gaussian_radial():
    # int |grad e^{-r^2}|^2 dx = int 4 r^2 e^{-2 r^2} 2 pi r dr = pi
    g = grids.build_grid("radial", 10.0, 4096)
    u = grids.field_from_radial(g, lambda r: np.exp(-r**2))
    assert abs(grids.dirichlet_energy(u) - np.pi) < 1e-4


def test_dirichlet_refinement_convergence():
    errs = []
    for n in (512, 1024):
        g = grids.build_grid("radial", 10.0, n)
        u = grids.field_from_radial(g, lambda r: np.exp(-r**2))
        errs.append(abs(grids.dirichlet_energy(u) - np.pi))
    assert errs[0] / errs[1] >= 3.0


def test_dirichlet_gaussian_cartesian_converges():
    errs = []
    for n in (64, 128):
        g = grids.build_grid("cartesian", 8.0, n)
        u = grids.field_from_radial(g, lambda r: np.exp(-r**2))
        errs.append(abs(grids.dirichlet_energy(u) - np.pi))
    assert errs[0] / errs[1] >= 3.0
