#!/usr/bin/env python3
"""
Deterministic CSV and summary export for scenario runs.

Every CSV starts with a comment line recording the configuration hash and
the operator constants, then a header row. Floats are written with 17
significant digits, LF line endings.
"""

import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..core.psi_core import WeightedSpaceParams, space_weights
from ..models import BoundCheck, BoundCurve, SolutionTrace


def format_value(value: Any) -> str:
    """Text form of one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def comment_line(meta: Dict[str, Any]) -> str:
    """'# config_hash=... alpha=... beta=... gamma=... xi=... delta=... psi=...'."""
    keys = ("config_hash", "alpha", "beta", "gamma", "xi", "delta", "psi")
    return "# " + " ".join(f"{key}={format_value(meta.get(key, ''))}" for key in keys)


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: Dict[str, Any],
) -> str:
    """
    Write rows with the comment line and header.

    Returns:
        The path written
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(comment_line(meta) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(cell) for cell in row])
    return path


def write_trace(path: str, trace: SolutionTrace, space: WeightedSpaceParams, meta: Dict[str, Any]) -> str:
    """Columns t, x_1..x_n, weight, weighted_value; the singular node holds nan."""
    weights = space_weights(space, trace.grid)
    norms = trace.norms()
    mask = trace.included_mask()
    header = ["t"] + [f"x_{i + 1}" for i in range(trace.dimension)] + ["weight", "weighted_value"]

    rows = []
    for i, t in enumerate(trace.nodes):
        if mask[i]:
            values = list(trace.values[i])
            weighted = norms[i] / weights[i]
        else:
            values = [math.nan] * trace.dimension
            weighted = math.nan
        rows.append([float(t)] + [float(v) for v in values] + [float(weights[i]), float(weighted)])
    return write_csv(path, header, rows, meta)


def write_convergence(path: str, history: List[float], meta: Dict[str, Any]) -> str:
    """Columns iter, d_xi_inf, ratio (nan for the first sweep)."""
    rows = []
    for k, distance in enumerate(history):
        previous = history[k - 1] if k > 0 else 0.0
        ratio = distance / previous if previous > 0 else math.nan
        rows.append([k + 1, float(distance), ratio])
    return write_csv(path, ["iter", "d_xi_inf", "ratio"], rows, meta)


def bound_rows(trace: SolutionTrace, bound: BoundCurve, prefix: Sequence[Any] = ()) -> List[List[Any]]:
    """Rows t, value, bound, margin for the included nodes."""
    norms = trace.norms()
    mask = trace.included_mask() & bound.include
    rows = []
    for i, t in enumerate(trace.nodes):
        if not mask[i]:
            continue
        limit = float(bound.values[i])
        margin = norms[i] / limit if limit > 0 else (0.0 if norms[i] == 0 else math.inf)
        rows.append(list(prefix) + [float(t), float(norms[i]), limit, float(margin)])
    return rows


def check_to_dict(check: BoundCheck) -> Dict[str, Any]:
    return {
        "holds": check.holds,
        "worst_margin": check.worst_margin,
        "worst_node": check.worst_node,
        "violations": check.violations,
        "checked_nodes": check.checked_nodes,
    }


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        # JSON has no inf/nan literals
        return number if math.isfinite(number) else format_value(number)
    return value


def write_summary(path: str, summary: Dict[str, Any]) -> str:
    """Write the run summary as sorted, indented JSON."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        json.dump(_json_ready(summary), handle, sort_keys=True, indent=2)
        handle.write("\n")
    return path


def format_summary(summary: Dict[str, Any], title: Optional[str] = None) -> str:
    """Human-readable key/value listing of a summary dict."""
    lines = []
    if title:
        lines.append(title)
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, dict):
            lines.append(f"  {key}:")
            for sub in sorted(value):
                lines.append(f"    {sub}: {format_value(value[sub])}")
        else:
            lines.append(f"  {key}: {format_value(value)}")
    return "\n".join(lines)
