"""One-dimensional marginal approximations from evaluation clouds.

Four pipelines are provided, all returning one theta-scale MarginalApprox
per axis whose ``origin`` is the theta_z-scale marginal it came from:

- marginalize_grid: grid pointwise means, natural cubic spline, normalize.
- marginalize_lds_stm: one least-squares polynomial through all projected
  lattice evaluations in the density scale.
- marginalize_lds_qa: least-squares quadratic through log partition means.
- marginalize_lds_cx: the quadratic corrected by a degree-x least-squares
  polynomial fitted to its residuals.

Polynomials are held in the centered-scaled variable t in [-1, 1] and
fitted with an SVD least-squares solve, never through normal equations.
Normalization uses composite Simpson on 1001 fixed nodes.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy import integrate, interpolate

from .errors import FitError, InvalidArgumentError
from .pointset import DEFAULT_POINT_BUDGET, IntegrationRegion, PointSet
from .pointset import generate_grid, scale_to_region
from .projection import (EvaluationCloud, MIN_PARTITIONS, PartitionSummary,
                         evaluate_cloud, grid_axis_means, partition_means,
                         project_axis, worker_count)
from .targets import Reparam, TargetDensity

logger = logging.getLogger(__name__)

QUADRATURE_NODES = 1001
DEFAULT_PARTITIONS = 15
DEFAULT_CORRECTION_DEGREE = 3
DEFAULT_STM_DEGREE = 8
MIN_GRID_POINTS = 4
_SUPPORT_SLACK = 1e-12

DensityFn = Callable[[np.ndarray], np.ndarray]


class Scale(str, Enum):
    """Scale a marginal is expressed in."""
    THETA_Z = "theta_z"
    THETA = "theta"


def _to_unit(x: np.ndarray, support: tuple[float, float]) -> np.ndarray:
    a, b = support
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


@dataclass(frozen=True)
class LogPolyApprox:
    """Log-density polynomial in t = (2x - a - b) / (b - a) over [a, b]."""
    axis: int
    coeffs: np.ndarray
    support: tuple[float, float]

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        object.__setattr__(self, "coeffs", coeffs)
        if not np.all(np.isfinite(self(np.asarray(self.support)))):
            raise FitError(f"axis {self.axis + 1}: polynomial is not finite on its support")

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return poly.polyval(_to_unit(x, self.support), self.coeffs)


@dataclass(frozen=True)
class MarginalApprox:
    """Normalized one-dimensional density on a closed support.

    ``unnormalized`` returns non-negative values on the support and
    ``normalizer`` is its quadrature integral. ``rule`` describes the
    theta_z-scale evaluation rule in JSON-ready form.
    """
    axis: int
    scale: Scale
    support: tuple[float, float]
    normalizer: float
    method: str
    unnormalized: DensityFn = field(repr=False)
    rule: dict[str, Any] = field(default_factory=dict, repr=False)
    reparam: Reparam = Reparam.IDENTITY
    origin: "MarginalApprox | None" = field(default=None, repr=False)
    runge_warning: bool = False

    def density(self, x):
        """Normalized density, zero outside the support."""
        values = np.asarray(x, dtype=float)
        flat = values.reshape(-1)
        a, b = self.support
        slack = _SUPPORT_SLACK * (b - a)
        inside = (flat >= a - slack) & (flat <= b + slack)
        out = np.zeros(flat.shape)
        if np.any(inside):
            out[inside] = self.unnormalized(np.clip(flat[inside], a, b)) / self.normalizer
        return float(out[0]) if values.ndim == 0 else out.reshape(values.shape)

    @property
    def log_spaced(self) -> bool:
        return self.scale is Scale.THETA and self.reparam is Reparam.LOG

    def nodes(self, m: int = QUADRATURE_NODES) -> np.ndarray:
        """Evaluation nodes: equally spaced in theta_z, mapped through the reparam."""
        a, b = self.support
        if self.log_spaced:
            return np.exp(np.linspace(np.log(a), np.log(b), m))
        return np.linspace(a, b, m)

    def integral(self, m: int = QUADRATURE_NODES) -> float:
        """Simpson integral of the density over its support.

        For a log reparameterization this is the theta_z integral of the
        origin, which equals the theta integral under theta = exp(theta_z).
        It is a substitution, not a separate quadrature in theta.
        """
        if self.log_spaced and self.origin is not None:
            return self.origin.integral(m)
        x = np.linspace(*self.support, m)
        return float(integrate.simpson(self.density(x), x=x))

    @property
    def in_theta_z(self) -> "MarginalApprox":
        """The theta_z-scale marginal this one was derived from (or itself)."""
        return self.origin if self.origin is not None else self


def _normalizer(unnormalized: DensityFn, support: tuple[float, float]) -> float:
    x = np.linspace(*support, QUADRATURE_NODES)
    total = float(integrate.simpson(unnormalized(x), x=x))
    if not (np.isfinite(total) and total > 0.0):
        raise FitError(f"normalizing constant is {total} on {support}")
    return total


def marginal_from_density(fn: DensityFn, support: tuple[float, float], axis: int,
                          method: str, rule: dict[str, Any] | None = None) -> MarginalApprox:
    """Wrap a non-negative theta_z-scale density callable and normalize it.

    Without a rule the density is tabulated on the quadrature nodes.
    """
    a, b = float(support[0]), float(support[1])
    if not a < b:
        raise InvalidArgumentError(f"support needs a < b, got [{a}, {b}]")
    if rule is None:
        nodes = np.linspace(a, b, QUADRATURE_NODES)
        rule = {"kind": "tabulated", "nodes": nodes.tolist(),
                "values": np.asarray(fn(nodes), dtype=float).tolist()}
    return MarginalApprox(
        axis=axis,
        scale=Scale.THETA_Z,
        support=(a, b),
        normalizer=_normalizer(fn, (a, b)),
        method=method,
        unnormalized=fn,
        rule=rule,
    )


def normalize_log_poly(p: LogPolyApprox, method: str | None = None) -> MarginalApprox:
    """exp(p - max p) normalized over the support of p."""
    scan = p(np.linspace(*p.support, QUADRATURE_NODES))
    offset = float(np.max(scan))

    def unnormalized(x: np.ndarray) -> np.ndarray:
        return np.exp(p(x) - offset)

    tag = method or ("qa" if p.degree == 2 else f"cx{p.degree}")
    rule = {"kind": "log_polynomial", "coefficients": p.coeffs.tolist(),
            "support": list(p.support), "log_offset": offset}
    try:
        return marginal_from_density(unnormalized, p.support, p.axis, tag, rule)
    except FitError as exc:
        raise FitError(f"axis {p.axis + 1}: {exc}") from exc


def inverse_transform_marginal(m: MarginalApprox, reparam: Reparam) -> MarginalApprox:
    """Change of variables from theta_z to theta = h^-1(theta_z)."""
    if m.scale is not Scale.THETA_Z:
        raise InvalidArgumentError("marginal is already in the theta scale")
    if reparam is Reparam.IDENTITY:
        return replace(m, scale=Scale.THETA, reparam=reparam, origin=m)
    if reparam is not Reparam.LOG:
        raise InvalidArgumentError(f"cannot invert reparameterization {reparam}")

    def unnormalized(tau: np.ndarray) -> np.ndarray:
        return m.unnormalized(np.log(tau)) / tau

    a, b = m.support
    return replace(
        m,
        scale=Scale.THETA,
        support=(float(np.exp(a)), float(np.exp(b))),
        unnormalized=unnormalized,
        reparam=reparam,
        origin=m,
    )


def _lstsq_coeffs(x: np.ndarray, y: np.ndarray, degree: int,
                  support: tuple[float, float]) -> np.ndarray:
    design = poly.polyvander(_to_unit(x, support), degree)
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < degree + 1:
        raise FitError(f"design for degree {degree} is rank deficient (rank {rank})")
    return coeffs


def _usable(psum: PartitionSummary, needed: int, what: str) -> tuple[np.ndarray, np.ndarray]:
    mask = psum.usable
    if int(mask.sum()) < needed:
        raise FitError(
            f"axis {psum.axis + 1}: {what} needs {needed} usable partitions, "
            f"got {int(mask.sum())}"
        )
    return psum.midpoints[mask], psum.log_means[mask]


def fit_quadratic_log(psum: PartitionSummary) -> LogPolyApprox:
    """Least-squares quadratic through the log pointwise means."""
    x, y = _usable(psum, MIN_PARTITIONS, "a quadratic fit")
    return LogPolyApprox(psum.axis, _lstsq_coeffs(x, y, 2, psum.support), psum.support)


def correct_polynomial(q: LogPolyApprox, psum: PartitionSummary, x: int) -> LogPolyApprox:
    """Add a degree-x least-squares fit of the residuals (data - fit) to q."""
    if q.degree != 2:
        raise InvalidArgumentError(f"correction starts from a quadratic, got degree {q.degree}")
    if x < 3:
        raise InvalidArgumentError(f"correction degree must be at least 3, got {x}")
    mids, log_means = _usable(psum, x + 1, f"a degree-{x} correction")
    residuals = log_means - q(mids)
    coeffs = _lstsq_coeffs(mids, residuals, x, q.support)
    coeffs[: q.coeffs.size] += q.coeffs
    return LogPolyApprox(q.axis, coeffs, q.support)


def residual_sum_of_squares(p: LogPolyApprox, psum: PartitionSummary) -> float:
    """Sum of squared log-mean residuals over usable partitions."""
    mask = psum.usable
    residuals = psum.log_means[mask] - p(psum.midpoints[mask])
    return float(np.dot(residuals, residuals))


def _per_axis(target: TargetDensity, build: Callable[[int], MarginalApprox],
              workers: int | None) -> list[MarginalApprox]:
    def one(k: int) -> MarginalApprox:
        return inverse_transform_marginal(build(k), target.reparam[k])

    n_workers = worker_count(workers)
    if n_workers > 1 and target.dim > 1:
        with ThreadPoolExecutor(max_workers=min(n_workers, target.dim)) as pool:
            return list(pool.map(one, range(target.dim)))
    return [one(k) for k in range(target.dim)]


def _spline_marginal(psum: PartitionSummary, support: tuple[float, float],
                     method: str) -> MarginalApprox:
    knots = psum.midpoints
    if np.any(np.diff(knots) <= 0):
        raise FitError(f"axis {psum.axis + 1}: spline knots are not increasing")
    finite = psum.log_means[np.isfinite(psum.log_means)]
    values = np.exp(psum.log_means - np.max(finite))
    spline = interpolate.CubicSpline(knots, values, bc_type="natural")

    def unnormalized(x: np.ndarray) -> np.ndarray:
        return np.maximum(spline(x), 0.0)

    rule = {"kind": "spline", "knots": knots.tolist(), "values": values.tolist()}
    return marginal_from_density(unnormalized, support, psum.axis, method, rule)


def marginals_from_grid_cloud(target: TargetDensity, cloud: EvaluationCloud,
                              method: str = "grid",
                              workers: int | None = None) -> list[MarginalApprox]:
    """Grid pointwise means, natural cubic spline and normalization per axis."""
    return _per_axis(
        target,
        lambda k: _spline_marginal(grid_axis_means(cloud, k), cloud.region.axis(k), method),
        workers,
    )


def marginalize_grid(target: TargetDensity, region: IntegrationRegion, n: int,
                     budget: int = DEFAULT_POINT_BUDGET,
                     workers: int | None = None) -> list[MarginalApprox]:
    """Grid method on an n^s grid over the region."""
    if n < MIN_GRID_POINTS:
        raise InvalidArgumentError(
            f"the grid method needs at least {MIN_GRID_POINTS} points per axis, got {n}"
        )
    ps = scale_to_region(generate_grid(n, target.dim, budget), region)
    return marginals_from_grid_cloud(target, evaluate_cloud(target, ps, workers),
                                     workers=workers)


def _require_scaled(ps: PointSet) -> IntegrationRegion:
    if ps.region is None:
        raise InvalidArgumentError("point set must be scaled to a region first")
    return ps.region


def marginals_from_stm_cloud(target: TargetDensity, cloud: EvaluationCloud,
                             degree: int = DEFAULT_STM_DEGREE,
                             workers: int | None = None) -> list[MarginalApprox]:
    """Density-scale least-squares polynomial through every projected point."""
    if degree < 2:
        raise InvalidArgumentError(f"StM degree must be at least 2, got {degree}")
    if cloud.size <= degree + 1:
        raise InvalidArgumentError(
            f"StM degree {degree} needs more than {degree + 1} points, got {cloud.size}"
        )
    peak = float(np.max(cloud.log_values[np.isfinite(cloud.log_values)]))

    def build(k: int) -> MarginalApprox:
        pa = project_axis(cloud, k)
        support = cloud.region.axis(k)
        coeffs = _lstsq_coeffs(pa.abscissae, np.exp(pa.log_values - peak), degree, support)
        raw = poly.polyval(_to_unit(np.linspace(*support, QUADRATURE_NODES), support), coeffs)
        negatives = int(np.sum(raw < 0.0))
        if negatives:
            logger.warning(
                f"axis {k + 1}: degree-{degree} fit is negative at {negatives} of "
                f"{QUADRATURE_NODES} nodes (Runge oscillation), clamped to 0"
            )

        def unnormalized(x: np.ndarray) -> np.ndarray:
            return np.maximum(poly.polyval(_to_unit(x, support), coeffs), 0.0)

        rule = {"kind": "polynomial", "coefficients": coeffs.tolist(),
                "support": list(support)}
        m = marginal_from_density(unnormalized, support, k, "stm", rule)
        return replace(m, runge_warning=negatives > 0)

    return _per_axis(target, build, workers)


def marginalize_lds_stm(target: TargetDensity, ps: PointSet,
                        degree: int = DEFAULT_STM_DEGREE,
                        workers: int | None = None) -> list[MarginalApprox]:
    """LDS-StM on a region-scaled point set."""
    _require_scaled(ps)
    return marginals_from_stm_cloud(target, evaluate_cloud(target, ps, workers),
                                    degree, workers)


def marginals_from_partitions(target: TargetDensity, cloud: EvaluationCloud,
                              n: int = DEFAULT_PARTITIONS, x: int | None = None,
                              workers: int | None = None) -> list[MarginalApprox]:
    """Quadratic (x is None) or corrected (degree x) log fits per axis."""
    if n < MIN_PARTITIONS:
        raise InvalidArgumentError(
            f"at least {MIN_PARTITIONS} partitions are required for a quadratic "
            f"fit, got {n}"
        )

    def build(k: int) -> MarginalApprox:
        psum = partition_means(project_axis(cloud, k), n, *cloud.region.axis(k))
        fit = fit_quadratic_log(psum)
        if x is not None:
            fit = correct_polynomial(fit, psum, x)
        return normalize_log_poly(fit)

    return _per_axis(target, build, workers)


def marginalize_lds_qa(target: TargetDensity, ps: PointSet, n: int = DEFAULT_PARTITIONS,
                       workers: int | None = None) -> list[MarginalApprox]:
    """LDS-QA: quadratic log fit through partition means."""
    _require_scaled(ps)
    return marginals_from_partitions(target, evaluate_cloud(target, ps, workers), n,
                                     workers=workers)


def marginalize_lds_cx(target: TargetDensity, ps: PointSet, n: int = DEFAULT_PARTITIONS,
                       x: int = DEFAULT_CORRECTION_DEGREE,
                       workers: int | None = None) -> list[MarginalApprox]:
    """LDS-CX: LDS-QA with a degree-x residual correction."""
    _require_scaled(ps)
    if x < 3:
        raise InvalidArgumentError(f"correction degree must be at least 3, got {x}")
    return marginals_from_partitions(target, evaluate_cloud(target, ps, workers), n, x,
                                     workers)
