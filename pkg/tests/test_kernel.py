"""Kernel split, bilinear forms (direct vs fast) and HLS evaluators."""

import numpy as np
import pytest

from logchoquard import families, grids, kernel
from logchoquard.errors import (DomainError, ExponentMismatchError,
                                NegativeInputError, UnsupportedGridError)


def test_kernel_split_values():
    near, far, total = kernel.kernel_split(1.0)
    assert abs(near - np.log(2)) < 1e-15
    assert abs(far - np.log(2)) < 1e-15
    assert total == 0.0
    assert abs(kernel.kernel_split(0.5)[2] - np.log(2)) < 1e-14
    assert abs(kernel.kernel_split(2.0)[2] + np.log(2)) < 1e-14


def test_kernel_split_identity_sampled():
    r = np.geomspace(1e-6, 1e6, 100_000)
    _, _, total = kernel.kernel_split(r)
    eps = np.finfo(float).eps
    assert np.all(np.abs(total - np.log(1.0 / r)) <= 4 * eps * (1 + np.abs(np.log(r))))


def test_kernel_split_rejects_zero():
    with pytest.raises(DomainError):
        kernel.kernel_split(0.0)


def test_cell_average_log_inv_brute_force():
    # midpoint oracle for the cell-pair integral of log(1/|x-y|)
    h = 0.25
    m = 400
    z = (np.arange(m) + 0.5) / m * 2 * h - h
    zz1, zz2 = np.meshgrid(z, z, indexing="ij")
    wgt = (h - np.abs(zz1)) * (h - np.abs(zz2))
    rr = np.hypot(zz1, zz2)
    brute = np.sum(wgt * np.log(1.0 / rr)) * (2 * h / m) ** 2 / h**4
    d0, d1, d2 = kernel.cell_average_log_kernels(h)
    assert abs(d0 - brute) < 5e-3 * abs(brute)
    assert abs(d2 - (d1 + d0)) < 1e-14 * max(1.0, abs(d2))


@pytest.mark.parametrize("n", [16, 32])
def test_fast_matches_direct_cartesian(n):
    g = grids.build_grid("cartesian", 4.0, n)
    rng = np.random.default_rng(n)
    for _ in range(5):
        u = families.random_smooth(g, rng)
        v = families.random_smooth(g, rng)
        ref = kernel.bilinear_direct(u, v)
        fast = kernel.bilinear_fast(u, v)
        for which in ("B0", "B1", "B2"):
            err = abs(fast.value(which) - ref.value(which))
            assert err <= 1e-6 * (1 + abs(ref.value(which))), which


def test_fast_matches_direct_radial():
    g = grids.build_grid("radial", 10.0, 256)
    rng = np.random.default_rng(7)
    u = families.random_smooth(g, rng)
    v = families.random_smooth(g, rng)
    ref = kernel.bilinear_direct(u, v)
    fast = kernel.bilinear_fast(u, v)
    for which in ("B0", "B1", "B2"):
        err = abs(fast.value(which) - ref.value(which))
        assert err <= 1e-6 * (1 + abs(ref.value(which))), which


def test_zero_fields_give_zero_forms():
    g = grids.build_grid("cartesian", 2.0, 16)
    z = grids.zero_field(g)
    form = kernel.bilinear_direct(z, z)
    assert form.b0 == form.b1 == form.b2 == 0.0


def test_symmetry_of_forms():
    g = grids.build_grid("cartesian", 3.0, 24)
    rng = np.random.default_rng(5)
    u = families.random_smooth(g, rng)
    v = families.random_smooth(g, rng)
    d_uv = kernel.bilinear_direct(u, v)
    d_vu = kernel.bilinear_direct(v, u)
    scale = 1 + abs(d_uv.b1) + abs(d_uv.b2)
    assert abs(d_uv.b1 - d_vu.b1) < 1e-12 * scale
    assert abs(d_uv.b2 - d_vu.b2) < 1e-12 * scale
    f_uv = kernel.bilinear_fast(u, v)
    f_vu = kernel.bilinear_fast(v, u)
    assert abs(f_uv.b1 - f_vu.b1) < 1e-10 * scale
    assert abs(f_uv.b2 - f_vu.b2) < 1e-10 * scale


def test_point_mass_limit():
    # two narrow unit-mass bumps at distance 2: B0 ~= log(1/2)
    g = grids.build_grid("cartesian", 3.0, 256)
    u = families.bump(g, radius=0.05, center=(-1.0, 0.0))
    v = families.bump(g, radius=0.05, center=(1.0, 0.0))
    u = u.with_values(u.values / grids.integrate(u))
    v = v.with_values(v.values / grids.integrate(v))
    form = kernel.bilinear_fast(u, v)
    assert abs(form.b0 - np.log(0.5)) < 0.02 * abs(np.log(0.5))


def test_small_support_positive_form():
    # supports inside B_{1/4} force |x-y| < 1/2, hence a positive kernel
    g = grids.build_grid("cartesian", 3.0, 256)
    u = families.bump(g, radius=0.05)
    u = u.with_values(u.values / grids.integrate(u))
    form = kernel.bilinear_fast(u, u)
    assert form.b0 > 0
    mass = grids.integrate(u)
    assert form.b0 >= np.log(2) * mass**2 * (1 - 1e-9)


def test_b2_nonnegative_for_nonnegative_inputs():
    g = grids.build_grid("radial", 10.0, 256)
    u = families.gaussian(g, 1.0)
    form = kernel.bilinear_fast(u, u)
    assert form.b2 >= 0
    assert form.b1 >= 0


def test_b1_weighted_l1_bound():
    # B1(u, v) <= ||u||_{L1(w)} ||v||_1 + ||u||_1 ||v||_{L1(w)}, w = log(1+|x|)
    g = grids.build_grid("cartesian", 6.0, 64)
    u = families.gaussian(g, 1.0, center=(1.0, 0.5))
    v = families.gaussian(g, 1.5, center=(-2.0, 1.0))
    w = np.log1p(g.radii())
    b1 = kernel.bilinear_fast(u, v).b1
    bound = (grids.integrate(u, weight=w) * grids.integrate(v)
             + grids.integrate(u) * grids.integrate(v, weight=w))
    assert b1 <= bound * (1 + 1e-9)


def test_radial_disc_self_energy_oracle():
    # uniform unit-mass density on the unit disc: B0 = 1/4 exactly
    g = grids.build_grid("radial", 10.0, 2048, anchors=(1.0,))
    vals = np.where(g.nodes <= 1.0, 1.0 / np.pi, 0.0)
    u = grids.GridField(g, vals)
    u = u.with_values(u.values / grids.integrate(u))
    form = kernel.bilinear_fast(u, u)
    assert abs(form.b0 - 0.25) < 0.01


def test_b1_grows_when_gaussian_translated_outward():
    g = grids.build_grid("cartesian", 8.0, 96)
    u = families.gaussian(g, 0.8)
    b_near = kernel.bilinear_fast(u, families.gaussian(g, 0.8, center=(1.0, 0.0))).b1
    b_far = kernel.bilinear_fast(u, families.gaussian(g, 0.8, center=(3.0, 0.0))).b1
    assert b_far > b_near


def test_hls_exponent_validation():
    g = grids.build_grid("cartesian", 4.0, 32)
    u = families.gaussian(g, 1.0)
    with pytest.raises(ExponentMismatchError):
        kernel.hls_check(u, u, mu=1.0, s=2.0, r=2.0)


def test_hls_zero_fields():
    g = grids.build_grid("cartesian", 4.0, 32)
    z = grids.zero_field(g)
    rep = kernel.hls_check(z, z, mu=1.0, s=4 / 3, r=4 / 3)
    assert rep.lhs == 0.0 and rep.norm_product == 0.0


def test_hls_scaling_invariance():
    g = grids.build_grid("cartesian", 5.0, 48)
    u = families.gaussian(g, 1.2)
    rep1 = kernel.hls_check(u, u, mu=1.0, s=4 / 3, r=4 / 3)
    u2 = u.with_values(3.7 * u.values)
    rep2 = kernel.hls_check(u2, u2, mu=1.0, s=4 / 3, r=4 / 3)
    assert abs(rep1.ratio - rep2.ratio) < 1e-12 * rep1.ratio


def test_hls_ratio_stable_under_refinement():
    ratios = []
    for n in (48, 96):
        g = grids.build_grid("cartesian", 6.0, n)
        u = families.gaussian(g, 1.0)
        ratios.append(kernel.hls_check(u, u, mu=1.0, s=4 / 3, r=4 / 3).ratio)
    assert abs(ratios[1] - ratios[0]) < 0.02 * abs(ratios[1])


def test_hls_radial_unsupported():
    g = grids.build_grid("radial", 5.0, 64)
    u = families.gaussian(g, 1.0)
    with pytest.raises(UnsupportedGridError):
        kernel.hls_check(u, u, mu=1.0, s=4 / 3, r=4 / 3)


def test_log_hls_disc_indicator_entropy():
    g = grids.build_grid("cartesian", 2.0, 192)
    vals = np.where(g.radii() <= 1.0, 1.0 / np.pi, 0.0)
    u = grids.GridField(g, vals)
    rep = kernel.log_hls_check(u, u)
    assert abs(rep.entropy_u + np.log(np.pi)) < 0.05
    assert abs(rep.lhs - 1.0) < 0.05   # 4 * B0 = 4 * 1/4 for the unit disc
    assert rep.c_n_required >= rep.lhs - 2 * rep.entropy_u - 1e-12


def test_log_hls_gaussian_stable_under_refinement():
    required = []
    for n in (96, 144):
        g = grids.build_grid("cartesian", 8.0, n)
        u = families.gaussian(g, 1.0)
        u = u.with_values(u.values / grids.integrate(u))
        required.append(kernel.log_hls_check(u, u).c_n_required)
    assert abs(required[1] - required[0]) < 0.01 * abs(required[1])


def test_log_hls_dilation_probe():
    # the fitted constant is dilation invariant in the continuum; the
    # discrete values agree within 2%
    fitted = []
    for sigma in (1.0, 1.5):
        g = grids.build_grid("cartesian", 10.0, 128)
        u = families.gaussian(g, sigma)
        fitted.append(kernel.log_hls_check(u, u).c_n_required)
    assert abs(fitted[1] - fitted[0]) < 0.02 * abs(fitted[0])


def test_log_hls_negative_input():
    g = grids.build_grid("cartesian", 2.0, 16)
    u = grids.GridField(g, -np.ones(g.shape))
    with pytest.raises(NegativeInputError):
        kernel.log_hls_check(u, u)
