"""Orthogonal projection of evaluations onto marginal axes.

An EvaluationCloud pairs scaled points with their log-density values.
Projecting onto axis k keeps the k-th coordinate and the value of every
point; partition_means() then averages the projected values over n
equal-width partitions of [a_k, b_k), and grid_axis_means() averages them
over the n^(s-1) grid points sharing each grid abscissa.

Averaging happens in the density scale: values are exponentiated after
subtracting the partition maximum, summed with math.fsum in abscissa
order, and the offset is restored in the log. This keeps the means finite
for values spread over hundreds of orders of magnitude.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FitError, InvalidArgumentError
from .pointset import IntegrationRegion, PointSet, PointSetKind
from .targets import TargetDensity

logger = logging.getLogger(__name__)

MIN_PARTITIONS = 3
WORKERS_ENV = "LDSMARGINALS_WORKERS"


def worker_count(workers: int | None = None) -> int:
    """Explicit worker count, else the LDSMARGINALS_WORKERS cap, else 1."""
    if workers is not None:
        return max(1, int(workers))
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        logger.warning(f"ignoring non-integer {WORKERS_ENV}={raw!r}")
        return 1


@dataclass(frozen=True)
class EvaluationCloud:
    """N scaled points with their log-density values."""
    points: np.ndarray
    log_values: np.ndarray
    region: IntegrationRegion
    grid_n: int | None = None

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass(frozen=True)
class ProjectedAxis:
    """Abscissae on one axis paired with the log values of their points."""
    axis: int
    abscissae: np.ndarray
    log_values: np.ndarray


@dataclass(frozen=True)
class PartitionSummary:
    """Per-partition midpoints, occupancy counts and pointwise means.

    ``edges`` is None for grid-born summaries, whose midpoints are the grid
    abscissae themselves.
    """
    axis: int
    edges: np.ndarray | None
    midpoints: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    log_means: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        """Mask of partitions that feed a fit (non-empty, finite log mean)."""
        return (self.counts > 0) & np.isfinite(self.log_means)

    @property
    def support(self) -> tuple[float, float]:
        if self.edges is not None:
            return float(self.edges[0]), float(self.edges[-1])
        return float(self.midpoints[0]), float(self.midpoints[-1])


def evaluate_cloud(target: TargetDensity, ps: PointSet,
                   workers: int | None = None) -> EvaluationCloud:
    """Evaluate the target at every point of a region-scaled point set."""
    if ps.region is None:
        raise InvalidArgumentError("point set must be scaled to a region first")
    if ps.dim != target.dim:
        raise InvalidArgumentError(
            f"point set has {ps.dim} axes, target {target.label} has {target.dim}"
        )

    n_workers = worker_count(workers)
    if n_workers > 1 and ps.big_n > n_workers:
        chunks = np.array_split(ps.points, n_workers)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            log_values = np.concatenate(list(pool.map(target.evaluate, chunks)))
    else:
        log_values = target.evaluate(ps.points)

    if not np.any(np.isfinite(log_values)):
        raise FitError(f"{target.label} is zero at every point of the cloud")
    grid_n = ps.n_per_axis if ps.kind is PointSetKind.GRID else None
    return EvaluationCloud(ps.points, log_values, ps.region, grid_n)


def _check_axis(cloud: EvaluationCloud, k: int) -> None:
    if not 0 <= k < cloud.dim:
        raise InvalidArgumentError(f"axis {k} outside [0, {cloud.dim - 1}]")


def project_axis(cloud: EvaluationCloud, k: int) -> ProjectedAxis:
    """Keep the k-th coordinate and the value of every point (column selection)."""
    _check_axis(cloud, k)
    return ProjectedAxis(k, cloud.points[:, k].copy(), cloud.log_values.copy())


def project_axis_explicit(cloud: EvaluationCloud, k: int) -> ProjectedAxis:
    """Same projection through the matrix P_k = A_k (A_k^T A_k)^-1 A_k^T.

    Psi stacks the coordinates and the value of each point as a row; the
    columns of Psi P_k that survive are the k-th coordinate and the value.
    Needs finite values, since 0 * inf is undefined.
    """
    _check_axis(cloud, k)
    if not np.all(np.isfinite(cloud.log_values)):
        raise InvalidArgumentError("explicit projection needs finite values")
    s = cloud.dim
    psi = np.column_stack([cloud.points, cloud.log_values])
    basis = np.zeros((s + 1, 2))
    basis[k, 0] = 1.0
    basis[s, 1] = 1.0
    proj = basis @ np.linalg.inv(basis.T @ basis) @ basis.T
    projected = psi @ proj
    kept = np.flatnonzero(np.diag(proj))
    return ProjectedAxis(k, projected[:, kept[0]], projected[:, kept[1]])


def _log_mean(log_values: np.ndarray,
              weights: np.ndarray | None = None) -> tuple[float, float]:
    """(mean, log mean) of exp(log_values) with max-subtraction."""
    finite = log_values[np.isfinite(log_values)]
    if finite.size == 0:
        return 0.0, -math.inf
    if weights is None:
        weights = np.ones(log_values.size)
    peak = float(np.max(finite))
    total = math.fsum((weights * np.exp(log_values - peak)).tolist())
    log_mean = math.log(total / math.fsum(weights.tolist())) + peak
    with np.errstate(over="ignore"):
        return float(np.exp(log_mean)), log_mean


def _ordered(pa: ProjectedAxis) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((pa.log_values, pa.abscissae))
    return pa.abscissae[order], pa.log_values[order]


def partition_means(pa: ProjectedAxis, n: int, a_k: float, b_k: float) -> PartitionSummary:
    """Pointwise means over n equal-width partitions of [a_k, b_k]."""
    if n < MIN_PARTITIONS:
        raise InvalidArgumentError(
            f"at least {MIN_PARTITIONS} partitions are required for a quadratic "
            f"fit, got {n}"
        )
    if not a_k < b_k:
        raise InvalidArgumentError(f"partition interval needs a < b, got [{a_k}, {b_k}]")

    abscissae, log_values = _ordered(pa)
    edges = np.linspace(a_k, b_k, n + 1)
    # right-open partitions, the last one closed on the right
    index = np.clip(np.searchsorted(edges, abscissae, side="right") - 1, 0, n - 1)

    counts = np.bincount(index, minlength=n)[:n]
    # lattices are periodic, so a point on a_k is also the point on b_k:
    # it weighs 1/2 in the first partition and 1/2 in the last
    on_lower = abscissae == a_k
    weights = np.where(on_lower, 0.5, 1.0)
    means = np.zeros(n)
    log_means = np.full(n, -np.inf)
    for u in np.flatnonzero(counts):
        members = index == u
        values, w = log_values[members], weights[members]
        if u == n - 1 and np.any(on_lower):
            values = np.concatenate([values, log_values[on_lower]])
            w = np.concatenate([w, weights[on_lower]])
        means[u], log_means[u] = _log_mean(values, w)

    if not np.any(counts):
        raise FitError(f"all {n} partitions of axis {pa.axis + 1} are empty")
    empty = int(np.sum(counts == 0))
    if empty:
        logger.warning(f"axis {pa.axis + 1}: {empty} of {n} partitions are empty")
    return PartitionSummary(
        axis=pa.axis,
        edges=edges,
        midpoints=0.5 * (edges[:-1] + edges[1:]),
        counts=counts,
        means=means,
        log_means=log_means,
    )


def grid_axis_means(cloud: EvaluationCloud, k: int) -> PartitionSummary:
    """Means over the n^(s-1) grid evaluations sharing each grid abscissa."""
    if cloud.grid_n is None:
        raise InvalidArgumentError("grid means need a cloud built from a grid")
    abscissae, log_values = _ordered(project_axis(cloud, k))
    unique, index = np.unique(abscissae, return_inverse=True)
    if unique.size != cloud.grid_n:
        raise InvalidArgumentError(
            f"expected {cloud.grid_n} grid abscissae on axis {k + 1}, found {unique.size}"
        )

    counts = np.bincount(index, minlength=unique.size)
    means = np.zeros(unique.size)
    log_means = np.full(unique.size, -np.inf)
    for l in range(unique.size):
        means[l], log_means[l] = _log_mean(log_values[index == l])
    return PartitionSummary(
        axis=k,
        edges=None,
        midpoints=unique,
        counts=counts,
        means=means,
        log_means=log_means,
    )
