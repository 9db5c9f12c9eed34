"""Reference marginals: the half-Gaussian baseline and the oracle.

The half-Gaussian baseline is a Gaussian with a different variance on each
side of the mode. Each variance is estimated from conditional slices of
the log-density through the mode, at displacements of one half and one
standard deviation on that side.

The oracle stands in for the true marginals. Analytic marginals are used
when the target carries them (truncated to the region and renormalized),
otherwise the grid method is run on a dense grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import FitError, InvalidArgumentError
from .marginalize import (MIN_GRID_POINTS, MarginalApprox, inverse_transform_marginal,
                          marginal_from_density, marginals_from_grid_cloud)
from .pointset import DEFAULT_POINT_BUDGET, IntegrationRegion, generate_grid, scale_to_region
from .projection import evaluate_cloud
from .targets import ModeSummary, TargetDensity, build_region

logger = logging.getLogger(__name__)

ORACLE_CHOICES = ("auto", "analytic", "dense", "none")
DEFAULT_DENSE_N = 9
_SLICE_FRACTIONS = (0.5, 1.0)


@dataclass(frozen=True)
class HalfGaussianFit:
    axis: int
    mu: float
    sigma_plus: float
    sigma_minus: float

    def __post_init__(self):
        if not (self.sigma_plus > 0 and self.sigma_minus > 0):
            raise FitError(
                f"axis {self.axis + 1}: half-Gaussian scales must be positive, got "
                f"{self.sigma_plus} and {self.sigma_minus}"
            )

    def log_shape(self, x: np.ndarray) -> np.ndarray:
        """Unnormalized log density, continuous at mu."""
        d = np.asarray(x, dtype=float) - self.mu
        sigma = np.where(d >= 0.0, self.sigma_plus, self.sigma_minus)
        return -0.5 * (d / sigma) ** 2


def _side_sigma(target: TargetDensity, mode: np.ndarray, k: int, sd: float,
                sign: float) -> float:
    base = target.log_pdf(mode)
    d = sign * sd * np.asarray(_SLICE_FRACTIONS)
    points = np.repeat(mode[None, :], d.size, axis=0)
    points[:, k] += d
    g = target.evaluate(points) - base
    if not np.all(np.isfinite(g)):
        raise FitError(f"axis {k + 1}: slice through the mode is not finite")
    # least squares for g = -c d^2 through the origin
    c = -float(np.dot(d**2, g) / np.sum(d**4))
    if not c > 0:
        raise FitError(f"axis {k + 1}: slice curvature {c} is not positive")
    return float(np.sqrt(0.5 / c))


def fit_half_gaussian(target: TargetDensity, ms: ModeSummary, k: int) -> HalfGaussianFit:
    """Per-side scales for axis k from conditional slices through the mode."""
    mode = np.asarray(ms.mode, dtype=float)
    sd = float(ms.std_devs[k])
    return HalfGaussianFit(
        axis=k,
        mu=float(mode[k]),
        sigma_plus=_side_sigma(target, mode, k, sd, 1.0),
        sigma_minus=_side_sigma(target, mode, k, sd, -1.0),
    )


def half_gaussian_baseline(target: TargetDensity, ms: ModeSummary,
                           region: IntegrationRegion | None = None) -> list[MarginalApprox]:
    """Normalized half-Gaussian marginal for every axis, in the theta scale."""
    region = region or build_region(ms)
    if region.dim != target.dim:
        raise InvalidArgumentError(
            f"region has {region.dim} axes, target {target.label} has {target.dim}"
        )
    marginals = []
    for k in range(target.dim):
        fit = fit_half_gaussian(target, ms, k)
        logger.debug(
            f"axis {k + 1}: half-Gaussian mu={fit.mu:.6g} "
            f"sigma+={fit.sigma_plus:.6g} sigma-={fit.sigma_minus:.6g}"
        )

        def unnormalized(x: np.ndarray, fit: HalfGaussianFit = fit) -> np.ndarray:
            return np.exp(fit.log_shape(x))

        rule = {"kind": "half_gaussian", "mu": fit.mu, "sigma_plus": fit.sigma_plus,
                "sigma_minus": fit.sigma_minus}
        m = marginal_from_density(unnormalized, region.axis(k), k, "half-gaussian", rule)
        marginals.append(inverse_transform_marginal(m, target.reparam[k]))
    return marginals


def dense_grid_oracle(target: TargetDensity, region: IntegrationRegion,
                      n_dense: int = DEFAULT_DENSE_N,
                      budget: int = DEFAULT_POINT_BUDGET,
                      workers: int | None = None) -> list[MarginalApprox]:
    """Grid method on an n_dense^s grid, tagged as the oracle."""
    if n_dense < MIN_GRID_POINTS:
        raise InvalidArgumentError(
            f"the dense grid needs at least {MIN_GRID_POINTS} points per axis, got {n_dense}"
        )
    ps = scale_to_region(generate_grid(n_dense, target.dim, budget), region)
    logger.info(f"dense-grid oracle: {ps.big_n} evaluations of {target.label}")
    return marginals_from_grid_cloud(target, evaluate_cloud(target, ps, workers),
                                     method="oracle", workers=workers)


def analytic_oracle(target: TargetDensity, region: IntegrationRegion) -> list[MarginalApprox]:
    """Closed-form marginals truncated to the region and renormalized."""
    if target.analytic_marginals is None:
        raise InvalidArgumentError(f"{target.label} has no analytic marginals")
    marginals = []
    for k, pdf in enumerate(target.analytic_marginals):
        m = marginal_from_density(pdf, region.axis(k), k, "oracle")
        marginals.append(inverse_transform_marginal(m, target.reparam[k]))
    return marginals


def oracle_marginals(target: TargetDensity, region: IntegrationRegion,
                     mode: str = "auto", n_dense: int = DEFAULT_DENSE_N,
                     budget: int = DEFAULT_POINT_BUDGET,
                     workers: int | None = None) -> list[MarginalApprox] | None:
    """Oracle marginals; "auto" prefers analytic ones and falls back to the dense grid."""
    if mode not in ORACLE_CHOICES:
        raise InvalidArgumentError(
            f"unknown oracle {mode!r}, expected one of {', '.join(ORACLE_CHOICES)}"
        )
    if mode == "none":
        return None
    if mode == "analytic" or (mode == "auto" and target.analytic_marginals is not None):
        return analytic_oracle(target, region)
    return dense_grid_oracle(target, region, n_dense, budget, workers)
