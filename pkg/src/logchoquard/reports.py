"""Run reports: schema-stable JSON/CSV emission and field persistence.

Floats are serialized with 17 significant digits, which round-trips
float64 exactly; report bytes are bit-reproducible for identical runs.
"""

from __future__ import annotations

import numpy as np

from . import grids
from .errors import ValidationError

ARTIFACT_VERSION = "0.1.0"


def format_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x == float("inf"):
        return "Infinity"
    if x == float("-inf"):
        return "-Infinity"
    return format(float(x), ".17g")


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(obj, parts, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            parts.append(f'{pad}  "{key}": ')
            _write_json(value, parts, indent + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, list):
        if not obj:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, value in enumerate(obj):
            parts.append(pad + "  ")
            _write_json(value, parts, indent + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "]")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif obj is None:
        parts.append("null")
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, int):
        parts.append(str(obj))
    else:
        escaped = str(obj).replace("\\", "\\\\").replace('"', '\\"')
        parts.append(f'"{escaped}"')


def render_json(payload: dict) -> str:
    parts = []
    _write_json(_to_jsonable(payload), parts)
    parts.append("\n")
    return "".join(parts)


def _flatten(obj, prefix, rows):
    if isinstance(obj, dict):
        for key, value in obj.items():
            _flatten(value, f"{prefix}.{key}" if prefix else str(key), rows)
    elif isinstance(obj, list):
        for i, value in enumerate(obj):
            _flatten(value, f"{prefix}[{i}]", rows)
    else:
        if isinstance(obj, float):
            rows.append((prefix, format_float(obj)))
        elif isinstance(obj, bool):
            rows.append((prefix, "true" if obj else "false"))
        else:
            rows.append((prefix, "" if obj is None else str(obj)))


def render_csv(payload: dict) -> str:
    rows = []
    _flatten(_to_jsonable(payload), "", rows)
    lines = ["key,value"]
    for key, value in rows:
        if "," in value or '"' in value:
            value = '"' + value.replace('"', '""') + '"'
        lines.append(f"{key},{value}")
    return "\n".join(lines) + "\n"


def build_report(command: str, resolved_config: dict, results: dict,
                 diagnostics: dict) -> dict:
    """Assemble the standard report envelope."""
    return {
        "command": command,
        "artifact_version": ARTIFACT_VERSION,
        "config": resolved_config,
        "results": results,
        "diagnostics": diagnostics,
    }


def write_report(report: dict, path, fmt: str = "json") -> str:
    text = render_json(report) if fmt == "json" else render_csv(report)
    if path is not None:
        with open(path, "w") as handle:
            handle.write(text)
    return text


# ---------------------------------------------------------------------------
# field persistence
# ---------------------------------------------------------------------------

def save_field(field: grids.GridField, path: str):
    """Header line (kind, radius, resolution) + whitespace-separated values;
    17-digit decimals give a bit-exact round trip."""
    grid = field.grid
    with open(path, "w") as handle:
        handle.write(f"{grid.kind} {format_float(grid.domain_radius)} "
                     f"{grid.resolution}\n")
        flat = field.values.ravel()
        for start in range(0, len(flat), 8):
            handle.write(" ".join(format_float(v)
                                  for v in flat[start:start + 8]) + "\n")


def load_field(path: str) -> grids.GridField:
    with open(path) as handle:
        header = handle.readline().split()
        if len(header) != 3:
            raise ValidationError(f"malformed field file header in {path!r}")
        kind, radius, resolution = header[0], float(header[1]), int(header[2])
        values = np.array([float(tok) for tok in handle.read().split()])
    grid = grids.build_grid(kind, radius, resolution)
    expected = grid.num_nodes
    if values.size != expected:
        raise ValidationError(
            f"field file has {values.size} values, grid needs {expected}")
    return grids.GridField(grid, values.reshape(grid.shape))
