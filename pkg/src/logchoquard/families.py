"""Built-in test field families: Gaussians, compact bumps, Moser caps,
and seeded random smooth fields."""

from __future__ import annotations

import numpy as np

from . import grids


def moser_profile(r, n: int, rho: float):
    """Three-branch Moser cap: plateau sqrt(log n / 2 pi) on [0, rho/n],
    logarithmic decay on [rho/n, rho], zero beyond rho."""
    r = np.asarray(r, dtype=float)
    log_n = np.log(n)
    plateau = np.sqrt(log_n / (2.0 * np.pi))
    with np.errstate(divide="ignore"):
        branch = np.log(rho / np.maximum(r, 1e-300)) / np.sqrt(2.0 * np.pi * log_n)
    out = np.where(r <= rho / n, plateau, np.where(r < rho, branch, 0.0))
    return out


def gaussian(grid: grids.Grid, sigma: float = 1.0, center=(0.0, 0.0),
             amplitude: float = 1.0) -> grids.GridField:
    if grid.kind == "radial":
        if center != (0.0, 0.0):
            raise ValueError("radial grids only support centered gaussians")
        r = grid.radii()
        return grids.GridField(grid, amplitude * np.exp(-(r / sigma) ** 2))
    xx, yy = grid.meshgrid()
    rr2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    return grids.GridField(grid, amplitude * np.exp(-rr2 / sigma**2))


def bump(grid: grids.Grid, radius: float = 0.25, center=(0.0, 0.0),
         amplitude: float = 1.0) -> grids.GridField:
    """Smooth compactly supported mollifier, = amplitude at the center,
    identically zero outside the ball of the given radius."""
    if grid.kind == "radial":
        if center != (0.0, 0.0):
            raise ValueError("radial grids only support centered bumps")
        d2 = (grid.radii() / radius) ** 2
    else:
        xx, yy = grid.meshgrid()
        d2 = ((xx - center[0]) ** 2 + (yy - center[1]) ** 2) / radius**2
    inside = d2 < 1.0
    vals = np.zeros(grid.shape)
    with np.errstate(divide="ignore", over="ignore"):
        vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - d2[inside]))
    return grids.GridField(grid, vals)


def random_smooth(grid: grids.Grid, rng: np.random.Generator,
                  n_bumps: int = 6, max_center: float | None = None,
                  positive: bool = False) -> grids.GridField:
    """Seeded superposition of random Gaussians, used by randomized oracles.

    ``positive`` restricts to nonnegative amplitudes; sign-definite fields
    stay clear of the curvature kink of the one-sided nonlinearity at 0.
    """
    if max_center is None:
        max_center = 0.5 * grid.domain_radius
    vals = np.zeros(grid.shape)
    for _ in range(n_bumps):
        amp = rng.uniform(0.2, 1.0) if positive else rng.uniform(-1.0, 1.0)
        sigma = rng.uniform(0.2, 1.0) * max(grid.spacing * 4, 0.2)
        if grid.kind == "radial":
            c = rng.uniform(0, max_center)
            r = grid.radii()
            vals += amp * np.exp(-((r - c) / sigma) ** 2)
        else:
            cx, cy = rng.uniform(-max_center, max_center, size=2)
            xx, yy = grid.meshgrid()
            vals += amp * np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / sigma**2))
    return grids.GridField(grid, vals)


def sandwich_family(grid: grids.Grid):
    """>= 10 radial profiles (gaussians, bumps, Moser caps) for norm checks."""
    members = []
    for sigma in (0.5, 0.8, 1.2, 2.0, 3.0):
        members.append((f"gaussian_sigma={sigma}", gaussian(grid, sigma)))
    for radius in (1.0, 2.0, 4.0):
        members.append((f"bump_radius={radius}", bump(grid, radius)))
    for n in (8, 32):
        members.append(
            (f"moser_n={n}",
             grids.GridField(grid, moser_profile(grid.radii(), n, 0.5))))
    return members


def moser_family(ns, rho: float = 0.5, domain_radius: float = 20.0,
                 resolution: int = 2048):
    """Moser caps on per-n grids whose nodes are aligned with the corners."""
    members = []
    for n in ns:
        g = grids.build_grid("radial", domain_radius, resolution,
                             anchors=(rho / n, rho))
        grids.require_plateau_resolution(g, rho / n, 4)
        field = grids.GridField(g, moser_profile(g.radii(), n, rho))
        members.append(({"n": n, "rho": rho}, field))
    return members
