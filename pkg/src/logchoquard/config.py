"""Run configuration: a plain key-value text file with nested sections.

Sections: [grid], [nonlinearity], [potential], [solver], [embedding],
[moser], [kernel_bench], [output].  Every command validates the complete
configuration before any computation starts; defaults live in the single
table below.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from . import nonlinearity as nl
from .errors import ValidationError
from .spaces import PeriodicCoefficient

DEFAULTS = {
    "grid": {
        "kind": "radial",
        "domain_radius": "20.0",
        "resolution": "2048",
    },
    "nonlinearity": {
        "kind": "exp_minus_one",
        # q is required; p, s0, beta, c_amplitude are optional
        "p": "",
        "s0": "1.0",
        "beta": "1.0",
        "c_floor": "1.0",
        "c_amplitude": "0.0",
    },
    "potential": {
        "floor": "1.0",
        "amplitude": "0.0",
    },
    "solver": {
        # the solve command runs on a cartesian lattice whose cell divides 1,
        # so integer-lattice recentering is an exact whole-cell roll
        "grid_kind": "cartesian",
        "domain_radius": "16.0",
        "resolution": "128",
        "path_nodes": "16",
        "descent_step": "1.0",
        "max_iterations": "20000",
        "residual_tolerance": "1e-4",
        "rho_sphere": "1e-2",
        "witness_radius": "0.25",
    },
    "embedding": {
        "alpha": "",            # defaults to 2 pi at runtime
        "bound_points": "10000",
        "moser_ns": "4,8,16,32,64",
        "rho": "0.5",
    },
    "moser": {
        "ns": "8,16,32,64",
        "rho": "0.5",
        "t_max": "4.0",
        "ray_samples": "96",
    },
    "kernel_bench": {
        "sizes": "16,32,64",
        "pairs": "20",
        "bench_radius": "4.0",
    },
    "scan": {
        "s_max": "10.0",
        "points": "2000",
    },
}

KNOWN_SECTIONS = set(DEFAULTS) | {"output"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    grid_kind: str
    domain_radius: float
    resolution: int
    spec: nl.NonlinearitySpec
    potential: PeriodicCoefficient
    q: float
    solver: dict
    embedding: dict
    moser: dict
    kernel_bench: dict
    scan: dict
    output_path: Optional[str] = None
    output_format: str = "json"
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict)


def _merged(parser: configparser.ConfigParser) -> dict:
    for section in parser.sections():
        if section not in KNOWN_SECTIONS:
            raise ValidationError(f"unknown config section [{section}]")
    merged = {}
    for section, defaults in DEFAULTS.items():
        block = dict(defaults)
        if parser.has_section(section):
            for key, value in parser.items(section):
                if key not in defaults and section != "nonlinearity":
                    raise ValidationError(
                        f"unknown key {key!r} in section [{section}]")
                block[key] = value
        merged[section] = block
    merged["output"] = dict(parser.items("output")) if parser.has_section("output") else {}
    return merged


def _as_float(block, section, key):
    raw = block.get(key, "")
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"[{section}] {key} must be a number, got {raw!r}")


def _as_int(block, section, key):
    raw = block.get(key, "")
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"[{section}] {key} must be an integer, got {raw!r}")


def _int_list(block, section, key):
    raw = block.get(key, "")
    try:
        return [int(tok) for tok in str(raw).replace(" ", "").split(",") if tok]
    except ValueError:
        raise ValidationError(f"[{section}] {key} must be a comma list of integers")


def _build_spec(block) -> tuple:
    kind = block.get("kind", "exp_minus_one")
    if kind not in nl.KINDS or kind == "custom":
        raise ValidationError(f"[nonlinearity] kind {kind!r} is not configurable")
    if "q" not in block or str(block["q"]).strip() == "":
        raise ValidationError("[nonlinearity] q is required")
    q = _as_float(block, "nonlinearity", "q")
    p_raw = str(block.get("p", "")).strip()
    if p_raw:
        p = _as_float(block, "nonlinearity", "p")
    else:
        p = {"exp_minus_one": 1.0, "power_exp": q, "piecewise": 2.0}[kind]
    c_profile = PeriodicCoefficient(
        _as_float(block, "nonlinearity", "c_floor"),
        _as_float(block, "nonlinearity", "c_amplitude"))
    try:
        spec = nl.NonlinearitySpec(
            kind=kind, p=p, q=q,
            s0=_as_float(block, "nonlinearity", "s0"),
            beta=_as_float(block, "nonlinearity", "beta"),
            c_profile=c_profile)
    except Exception as exc:
        raise ValidationError(f"invalid nonlinearity block: {exc}")
    return spec, q


def load_config(path: Optional[str], command: str, output_path=None,
                output_format="json", seed=0, threads=1) -> RunConfig:
    """Parse and fully validate a configuration file (or pure defaults)."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ValidationError(f"cannot read config file {path!r}")
    merged = _merged(parser)

    gblock = merged["grid"]
    grid_kind = gblock.get("kind", "radial")
    if grid_kind not in ("radial", "cartesian"):
        raise ValidationError(f"[grid] kind must be radial or cartesian")
    radius = _as_float(gblock, "grid", "domain_radius")
    resolution = _as_int(gblock, "grid", "resolution")
    if radius <= 0 or resolution < 8:
        raise ValidationError("[grid] needs domain_radius > 0, resolution >= 8")

    spec, q = _build_spec(merged["nonlinearity"])
    pblock = merged["potential"]
    floor = _as_float(pblock, "potential", "floor")
    amplitude = _as_float(pblock, "potential", "amplitude")
    if floor <= 0 or amplitude < 0:
        raise ValidationError("[potential] needs floor > 0 and amplitude >= 0")
    potential = PeriodicCoefficient(floor, amplitude)

    sblock = merged["solver"]
    solver_params = {
        "grid_kind": sblock.get("grid_kind", "cartesian"),
        "domain_radius": _as_float(sblock, "solver", "domain_radius"),
        "resolution": _as_int(sblock, "solver", "resolution"),
        "path_nodes": _as_int(sblock, "solver", "path_nodes"),
        "descent_step": _as_float(sblock, "solver", "descent_step"),
        "max_iterations": _as_int(sblock, "solver", "max_iterations"),
        "residual_tolerance": _as_float(sblock, "solver", "residual_tolerance"),
        "rho_sphere": _as_float(sblock, "solver", "rho_sphere"),
        "witness_radius": _as_float(sblock, "solver", "witness_radius"),
    }
    if solver_params["path_nodes"] < 8:
        raise ValidationError("[solver] path_nodes must be >= 8")
    if solver_params["residual_tolerance"] <= 0:
        raise ValidationError("[solver] residual_tolerance must be positive")

    eblock = merged["embedding"]
    embedding = {
        "alpha": (_as_float(eblock, "embedding", "alpha")
                  if str(eblock.get("alpha", "")).strip() else None),
        "bound_points": _as_int(eblock, "embedding", "bound_points"),
        "moser_ns": _int_list(eblock, "embedding", "moser_ns"),
        "rho": _as_float(eblock, "embedding", "rho"),
    }
    mblock = merged["moser"]
    moser = {
        "ns": _int_list(mblock, "moser", "ns"),
        "rho": _as_float(mblock, "moser", "rho"),
        "t_max": _as_float(mblock, "moser", "t_max"),
        "ray_samples": _as_int(mblock, "moser", "ray_samples"),
    }
    if not 0.0 < moser["rho"] <= 0.5:
        raise ValidationError("[moser] rho must lie in (0, 1/2]")
    if not 0.0 < embedding["rho"] <= 0.5:
        raise ValidationError("[embedding] rho must lie in (0, 1/2]")
    kblock = merged["kernel_bench"]
    kernel_bench = {
        "sizes": _int_list(kblock, "kernel_bench", "sizes"),
        "pairs": _as_int(kblock, "kernel_bench", "pairs"),
        "bench_radius": _as_float(kblock, "kernel_bench", "bench_radius"),
    }
    scblock = merged["scan"]
    scan = {
        "s_max": _as_float(scblock, "scan", "s_max"),
        "points": _as_int(scblock, "scan", "points"),
    }
    if scan["s_max"] < 10.0:
        raise ValidationError("[scan] s_max must be >= 10")

    out = merged["output"]
    if output_format not in ("json", "csv"):
        raise ValidationError("output format must be json or csv")
    return RunConfig(
        command=command, grid_kind=grid_kind, domain_radius=radius,
        resolution=resolution, spec=spec, potential=potential, q=q,
        solver=solver_params, embedding=embedding, moser=moser,
        kernel_bench=kernel_bench, scan=scan,
        output_path=output_path or out.get("path"),
        output_format=output_format, seed=seed, threads=threads,
        raw=merged,
    )
