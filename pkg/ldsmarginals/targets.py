"""Synthetic target densities and the mode/Hessian/region steps.

A TargetDensity is an evaluatable log-density over the working (theta_z)
scale together with a per-axis reparameterization back to theta and, where
known, closed-form marginals used as oracles. The builtin families stand in
for hyperparameter posteriors: near-Gaussian (make_gaussian), skewed log
precisions (make_skewed) and a multimodal axis (make_bimodal).

find_mode_hessian() and build_region() implement the first two steps of
every marginalization algorithm: locate the mode, measure curvature there,
and lay out mode +/- c standard deviations on each axis.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, special, stats

from .errors import ConvergenceError, InvalidArgumentError
from .pointset import IntegrationRegion

logger = logging.getLogger(__name__)

LogDensityFn = Callable[[np.ndarray], np.ndarray]
PdfFn = Callable[[np.ndarray], np.ndarray]

NORMALIZATION_TOLERANCE = 1e-6
_CHECK_SPAN_SD = 12.0
_CHECK_NODES = 4001
MAX_OPTIMIZER_ITERATIONS = 100_000
_REGULARIZATION_START = 1e-8
_REGULARIZATION_DOUBLINGS = 60


class Reparam(str, Enum):
    """Per-axis transform h with h(theta) = theta_z."""
    IDENTITY = "identity"
    LOG = "log"

    def forward(self, theta: np.ndarray) -> np.ndarray:
        return np.log(theta) if self is Reparam.LOG else np.asarray(theta, dtype=float)

    def inverse(self, theta_z: np.ndarray) -> np.ndarray:
        return np.exp(theta_z) if self is Reparam.LOG else np.asarray(theta_z, dtype=float)


@dataclass(frozen=True)
class TargetDensity:
    """Log-density in the theta_z scale plus reparameterization metadata.

    ``log_density`` maps an (N, s) array to N log values, returning -inf
    outside the support. ``marginal_moments`` holds (mean, sd) per axis and
    backs both the normalization check and the optimizer start.
    """
    dim: int
    log_density: LogDensityFn
    reparam: tuple[Reparam, ...]
    label: str
    marginal_moments: tuple[tuple[float, float], ...]
    analytic_marginals: tuple[PdfFn, ...] | None = field(default=None, repr=False)
    log_offset: float = 0.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Log-density at each row of an (N, s) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"{self.label} expects {self.dim} coordinates, got {pts.shape[1]}"
            )
        values = np.asarray(self.log_density(pts), dtype=float).reshape(-1)
        values = np.where(np.isnan(values), -np.inf, values)
        return values + self.log_offset if self.log_offset else values

    def log_pdf(self, x: Sequence[float]) -> float:
        """Log-density at a single s-vector."""
        return float(self.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0])

    @property
    def start(self) -> np.ndarray:
        """Deterministic optimizer start: marginal means offset by 0.1."""
        return np.array([mean for mean, _ in self.marginal_moments]) + 0.1

    def shifted(self, log_factor: float) -> "TargetDensity":
        """The same target multiplied by exp(log_factor)."""
        return replace(self, log_offset=self.log_offset + float(log_factor))


@dataclass(frozen=True)
class ModeSummary:
    """Mode, Hessian of -log density at the mode, and implied sds."""
    mode: np.ndarray
    hessian: np.ndarray
    std_devs: np.ndarray
    iterations: int = 0


def _check_marginals(label: str, pdfs: Sequence[PdfFn],
                     moments: Sequence[tuple[float, float]]) -> None:
    for k, (pdf, (mean, sd)) in enumerate(zip(pdfs, moments)):
        x = np.linspace(mean - _CHECK_SPAN_SD * sd, mean + _CHECK_SPAN_SD * sd,
                        _CHECK_NODES)
        total = integrate.simpson(pdf(x), x=x)
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidArgumentError(
                f"{label}: analytic marginal of axis {k + 1} integrates to {total:.9f}"
            )


def make_gaussian(mean: Sequence[float], covariance: np.ndarray) -> TargetDensity:
    """Multivariate normal target with normal analytic marginals."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    s = mean.size
    if cov.shape != (s, s):
        raise InvalidArgumentError(f"covariance must be {s}x{s}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=0.0):
        raise InvalidArgumentError("covariance must be symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("covariance must be positive definite") from exc

    dist = stats.multivariate_normal(mean=mean, cov=cov)
    sds = np.sqrt(np.diag(cov))
    pdfs = tuple(stats.norm(loc=m, scale=sd).pdf for m, sd in zip(mean, sds))
    moments = tuple((float(m), float(sd)) for m, sd in zip(mean, sds))
    _check_marginals("gaussian", pdfs, moments)

    def log_density(points: np.ndarray) -> np.ndarray:
        return np.atleast_1d(dist.logpdf(points))

    return TargetDensity(
        dim=s,
        log_density=log_density,
        reparam=(Reparam.IDENTITY,) * s,
        label=f"gaussian:dim={s}",
        marginal_moments=moments,
        analytic_marginals=pdfs,
    )


def make_skewed(s: int, shapes: Sequence[float]) -> TargetDensity:
    """Independent log-Gamma axes: theta_z = log tau with tau ~ Gamma(shape, 1)."""
    shapes = np.asarray(shapes, dtype=float).reshape(-1)
    if shapes.size != s:
        raise InvalidArgumentError(f"expected {s} shapes, got {shapes.size}")
    if np.any(shapes <= 0):
        raise InvalidArgumentError(f"Gamma shapes must be positive, got {shapes}")

    pdfs = tuple(stats.loggamma(c).pdf for c in shapes)
    moments = tuple(
        (float(special.digamma(c)), float(np.sqrt(special.polygamma(1, c))))
        for c in shapes
    )
    _check_marginals("skewed", pdfs, moments)

    def log_density(points: np.ndarray) -> np.ndarray:
        return np.sum(stats.loggamma.logpdf(points, shapes), axis=1)

    return TargetDensity(
        dim=s,
        log_density=log_density,
        reparam=(Reparam.LOG,) * s,
        label="skewed:shapes=" + ",".join(f"{c:g}" for c in shapes),
        marginal_moments=moments,
        analytic_marginals=pdfs,
    )


def _mixture_log_pdf(x: np.ndarray, separation: float, weight: float) -> np.ndarray:
    terms = np.stack([
        np.log(weight) + stats.norm.logpdf(x, loc=-separation / 2.0),
        np.log1p(-weight) + stats.norm.logpdf(x, loc=separation / 2.0),
    ])
    return special.logsumexp(terms, axis=0)


def make_bimodal(s: int, axis: int, separation: float, weight: float) -> TargetDensity:
    """Standard normal axes except one two-component Gaussian mixture axis.

    ``axis`` is 0-based. The mixture is weight*N(-sep/2, 1) + (1-weight)*N(sep/2, 1).
    """
    if not 0 <= axis < s:
        raise InvalidArgumentError(f"axis index {axis} outside [0, {s - 1}]")
    if separation < 0:
        raise InvalidArgumentError(f"separation must be non-negative, got {separation}")
    if not 0.0 < weight < 1.0:
        raise InvalidArgumentError(f"weight must lie in (0, 1), got {weight}")

    half = separation / 2.0
    mix_mean = (1.0 - 2.0 * weight) * half
    mix_sd = float(np.sqrt(1.0 + half**2 - mix_mean**2))

    def mixture_pdf(x: np.ndarray) -> np.ndarray:
        return np.exp(_mixture_log_pdf(np.asarray(x, dtype=float), separation, weight))

    pdfs = tuple(mixture_pdf if k == axis else stats.norm.pdf for k in range(s))
    moments = tuple((mix_mean, mix_sd) if k == axis else (0.0, 1.0) for k in range(s))
    _check_marginals("bimodal", pdfs, moments)

    def log_density(points: np.ndarray) -> np.ndarray:
        logs = stats.norm.logpdf(points)
        logs[:, axis] = _mixture_log_pdf(points[:, axis], separation, weight)
        return np.sum(logs, axis=1)

    return TargetDensity(
        dim=s,
        log_density=log_density,
        reparam=(Reparam.IDENTITY,) * s,
        label=f"bimodal:dim={s},axis={axis + 1},sep={separation:g},w={weight:g}",
        marginal_moments=moments,
        analytic_marginals=pdfs,
    )


def make_constant(s: int) -> TargetDensity:
    """Constant (log 0) density; marginals are uniform on any region."""
    if s < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {s}")

    def log_density(points: np.ndarray) -> np.ndarray:
        return np.zeros(points.shape[0])

    return TargetDensity(
        dim=s,
        log_density=log_density,
        reparam=(Reparam.IDENTITY,) * s,
        label=f"constant:dim={s}",
        marginal_moments=((0.0, 1.0),) * s,
    )


def _central_hessian(f: Callable[[np.ndarray], float], x0: np.ndarray,
                     steps: np.ndarray) -> np.ndarray:
    """Central second differences of a scalar function, symmetrized."""
    dim = x0.size
    f0 = f(x0)
    hess = np.zeros((dim, dim))
    basis = np.diag(steps)
    for i in range(dim):
        hess[i, i] = (f(x0 + basis[i]) - 2.0 * f0 + f(x0 - basis[i])) / steps[i]**2
        for j in range(i + 1, dim):
            pij = (f(x0 + basis[i] + basis[j]) - f(x0 + basis[i] - basis[j])
                   - f(x0 - basis[i] + basis[j]) + f(x0 - basis[i] - basis[j]))
            hess[i, j] = hess[j, i] = pij / (4.0 * steps[i] * steps[j])
    return hess


def _regularize(hess: np.ndarray) -> np.ndarray:
    try:
        linalg.cho_factor(hess)
        return hess
    except linalg.LinAlgError:
        pass
    delta = _REGULARIZATION_START
    eye = np.eye(hess.shape[0])
    for _ in range(_REGULARIZATION_DOUBLINGS):
        try:
            linalg.cho_factor(hess + delta * eye)
            logger.warning(f"Hessian regularized with delta={delta:.3g}")
            return hess + delta * eye
        except linalg.LinAlgError:
            delta *= 2.0
    raise ConvergenceError("Hessian is not positive definite after regularization")


def find_mode_hessian(target: TargetDensity, start: Sequence[float] | None = None,
                      max_iter: int = MAX_OPTIMIZER_ITERATIONS) -> ModeSummary:
    """Maximize the log-density with Nelder-Mead, then difference the Hessian."""
    x0 = target.start if start is None else np.asarray(start, dtype=float).reshape(-1)
    if x0.size != target.dim:
        raise InvalidArgumentError(f"start needs {target.dim} coordinates, got {x0.size}")
    if not np.isfinite(target.log_pdf(x0)):
        raise InvalidArgumentError(f"log density is not finite at the start {x0}")

    def neg_log(x: np.ndarray) -> float:
        value = target.log_pdf(x)
        return -value if np.isfinite(value) else np.inf

    scale = 1.0 + float(np.max(np.abs(x0)))
    result = optimize.minimize(
        neg_log, x0, method="Nelder-Mead",
        options={
            "xatol": 1e-9 * scale,
            "fatol": 1e-13,
            "maxiter": max_iter,
            "maxfev": max_iter,
            "adaptive": target.dim > 2,
        },
    )
    if result.status != 0:
        raise ConvergenceError(f"mode search did not converge: {result.message}")
    mode = np.asarray(result.x, dtype=float)
    logger.debug(f"{target.label}: mode {mode} after {result.nit} iterations")

    steps = np.cbrt(np.finfo(float).eps) * (1.0 + np.abs(mode))
    hess = _regularize(_central_hessian(neg_log, mode, steps))
    factor = linalg.cho_factor(hess)
    covariance = linalg.cho_solve(factor, np.eye(target.dim))
    return ModeSummary(
        mode=mode,
        hessian=hess,
        std_devs=np.sqrt(np.diag(covariance)),
        iterations=int(result.nit),
    )


def build_region(ms: ModeSummary, c: float = 3.0) -> IntegrationRegion:
    """Region mode_k +/- c * sd_k on every axis."""
    if not c > 0:
        raise InvalidArgumentError(f"region multiplier must be positive, got {c}")
    return IntegrationRegion(ms.mode - c * ms.std_devs, ms.mode + c * ms.std_devs)


def region_from_bounds(bounds: Sequence[float]) -> IntegrationRegion:
    """Region from a flat list a1, b1, a2, b2, ..."""
    flat = np.asarray(bounds, dtype=float).reshape(-1)
    if flat.size == 0 or flat.size % 2:
        raise InvalidArgumentError(
            f"region bounds come in (a, b) pairs, got {flat.size} values"
        )
    pairs = flat.reshape(-1, 2)
    return IntegrationRegion(pairs[:, 0], pairs[:, 1])
