"""Machine-readable outputs: CSV tables and versioned JSON descriptors.

CSV files follow RFC 4180 with '.' as decimal separator and floats written
with 17 significant digits. A marginal is written twice: a JSON descriptor
holding its evaluation rule (enough for load_marginal() to rebuild it) and
a CSV table of the density on 1001 theta_z nodes in both scales.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import replace
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy import interpolate

from .baselines import HalfGaussianFit
from .errors import InvalidArgumentError
from .marginalize import (QUADRATURE_NODES, MarginalApprox, inverse_transform_marginal,
                          marginal_from_density)
from .metrics import DistanceReport
from .pointset import PointSet
from .projection import PartitionSummary
from .targets import Reparam

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STUDY_COLUMNS = ("method", "N", "axis", "kl", "hellinger", "walltime_ms")


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def _write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                             for v in row])
    logger.debug(f"wrote {path}")
    return path


def write_points_csv(ps: PointSet, path: str) -> str:
    """One row per point, columns x1..xs."""
    header = [f"x{j + 1}" for j in range(ps.dim)]
    return _write_rows(path, header, (list(map(float, row)) for row in ps.points))


def write_projection_csv(summaries: Sequence[PartitionSummary], path: str) -> str:
    """Partition occupancy and pointwise means for every axis."""
    header = ["axis", "partition", "midpoint", "count", "log_mean"]
    rows = []
    for psum in summaries:
        for u, mid in enumerate(psum.midpoints):
            rows.append([psum.axis + 1, u + 1, float(mid), int(psum.counts[u]),
                         float(psum.log_means[u])])
    return _write_rows(path, header, rows)


def marginal_descriptor(m: MarginalApprox) -> dict[str, Any]:
    """JSON-ready description of a theta-scale marginal."""
    origin = m.in_theta_z
    return {
        "schema": SCHEMA_VERSION,
        "axis": m.axis + 1,
        "method": m.method,
        "reparam": m.reparam.value,
        "support_theta_z": list(origin.support),
        "support_theta": list(m.support),
        "normalizer": origin.normalizer,
        "runge_warning": m.runge_warning,
        "rule": origin.rule,
    }


def marginal_table(m: MarginalApprox, nodes: int = QUADRATURE_NODES) -> np.ndarray:
    """Columns theta_z, density_theta_z, theta, density_theta."""
    origin = m.in_theta_z
    z = np.linspace(*origin.support, nodes)
    theta = m.reparam.inverse(z)
    return np.column_stack([z, origin.density(z), theta, m.density(theta)])


def write_marginal(m: MarginalApprox, directory: str) -> tuple[str, str]:
    """Write axis{k}_{method}.json and .csv; returns both paths."""
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, f"axis{m.axis + 1}_{m.method}")
    json_path = f"{stem}.json"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(marginal_descriptor(m), f, indent=2)
    csv_path = _write_rows(f"{stem}.csv",
                           ["theta_z", "density_theta_z", "theta", "density_theta"],
                           marginal_table(m).tolist())
    return json_path, csv_path


def write_comparison_csv(reports: Sequence[DistanceReport], path: str) -> str:
    return _write_rows(path, ["axis", "kl", "hellinger"],
                       ([r.axis + 1, float(r.kl), float(r.hellinger)] for r in reports))


def write_study_csv(rows: Sequence[dict[str, Any]], path: str) -> str:
    return _write_rows(path, STUDY_COLUMNS, ([row[c] for c in STUDY_COLUMNS] for row in rows))


def write_manifest(manifest: dict[str, Any], path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def _density_from_rule(rule: dict[str, Any]):
    kind = rule.get("kind")
    if kind == "log_polynomial":
        coeffs = np.asarray(rule["coefficients"], dtype=float)
        a, b = rule["support"]
        offset = float(rule["log_offset"])
        return lambda x: np.exp(poly.polyval((2.0 * x - (a + b)) / (b - a), coeffs) - offset)
    if kind == "polynomial":
        coeffs = np.asarray(rule["coefficients"], dtype=float)
        a, b = rule["support"]
        return lambda x: np.maximum(poly.polyval((2.0 * x - (a + b)) / (b - a), coeffs), 0.0)
    if kind == "spline":
        spline = interpolate.CubicSpline(np.asarray(rule["knots"], dtype=float),
                                         np.asarray(rule["values"], dtype=float),
                                         bc_type="natural")
        return lambda x: np.maximum(spline(x), 0.0)
    if kind == "half_gaussian":
        fit = HalfGaussianFit(-1, rule["mu"], rule["sigma_plus"], rule["sigma_minus"])
        return lambda x: np.exp(fit.log_shape(x))
    if kind == "tabulated":
        nodes = np.asarray(rule["nodes"], dtype=float)
        values = np.asarray(rule["values"], dtype=float)
        return lambda x: np.interp(x, nodes, values)
    raise InvalidArgumentError(f"unknown marginal rule {kind!r}")


def load_marginal(path: str) -> MarginalApprox:
    """Rebuild the theta-scale marginal written by write_marginal()."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("schema") != SCHEMA_VERSION:
        raise InvalidArgumentError(
            f"{path}: unsupported descriptor schema {data.get('schema')!r}"
        )
    rule = data["rule"]
    origin = marginal_from_density(_density_from_rule(rule), tuple(data["support_theta_z"]),
                                   int(data["axis"]) - 1, data["method"], rule)
    m = inverse_transform_marginal(origin, Reparam(data["reparam"]))
    if data.get("runge_warning"):
        m = replace(m, runge_warning=True)
    return m
