"""Distances between two normalized one-dimensional densities.

Both densities are evaluated on m equally spaced nodes over the
intersection of their supports and renormalized so that sum * h = 1.
Comparisons always take place in the theta_z scale; KL is taken as
KL(reference || approximation).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DisjointSupportError, FitError, InvalidArgumentError
from .marginalize import QUADRATURE_NODES, MarginalApprox

logger = logging.getLogger(__name__)

METRIC_NODES = QUADRATURE_NODES


@dataclass(frozen=True)
class DistanceReport:
    """KL divergence and Hellinger distance for one axis."""
    axis: int
    kl: float
    hellinger: float
    grid_points: int
    support: tuple[float, float]
    method: str = ""
    infinite: bool = False


def _common_grid(p: MarginalApprox, q: MarginalApprox,
                 m: int) -> tuple[np.ndarray, np.ndarray, float, tuple[float, float]]:
    if m < 3:
        raise InvalidArgumentError(f"metric grid needs at least 3 nodes, got {m}")
    p, q = p.in_theta_z, q.in_theta_z
    a = max(p.support[0], q.support[0])
    b = min(p.support[1], q.support[1])
    if not a < b:
        raise DisjointSupportError(
            f"supports {p.support} and {q.support} do not overlap"
        )
    x = np.linspace(a, b, m)
    h = (b - a) / (m - 1)
    pv = p.density(x)
    qv = q.density(x)
    for name, values in (("first", pv), ("second", qv)):
        mass = float(np.sum(values)) * h
        if not mass > 0.0:
            raise FitError(f"{name} density vanishes on the common support [{a}, {b}]")
    pv = pv / (np.sum(pv) * h)
    qv = qv / (np.sum(qv) * h)
    return pv, qv, h, (a, b)


def _kl(pv: np.ndarray, qv: np.ndarray, h: float) -> float:
    mask = pv > 0.0
    if np.any(qv[mask] == 0.0):
        return math.inf
    return float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])) * h)


def _hellinger(pv: np.ndarray, qv: np.ndarray, h: float) -> float:
    overlap = float(np.sum(np.sqrt(pv * qv))) * h
    return min(1.0, math.sqrt(max(0.0, 1.0 - overlap)))


def kl_divergence(p: MarginalApprox, q: MarginalApprox, m: int = METRIC_NODES) -> float:
    """KL(p || q); +inf when q vanishes where p does not."""
    pv, qv, h, _ = _common_grid(p, q, m)
    value = _kl(pv, qv, h)
    if math.isinf(value):
        logger.warning(f"axis {p.axis + 1}: KL is infinite, {q.method} vanishes where "
                       f"{p.method} is positive")
    return value


def hellinger(p: MarginalApprox, q: MarginalApprox, m: int = METRIC_NODES) -> float:
    """Hellinger distance, clamped to [0, 1]."""
    pv, qv, h, _ = _common_grid(p, q, m)
    return _hellinger(pv, qv, h)


def compare_marginals(reference: MarginalApprox, approx: MarginalApprox,
                      m: int = METRIC_NODES) -> DistanceReport:
    """Both metrics on one shared grid."""
    if reference.axis != approx.axis:
        logger.warning(f"comparing axis {reference.axis + 1} against axis {approx.axis + 1}")
    pv, qv, h, support = _common_grid(reference, approx, m)
    kl = _kl(pv, qv, h)
    if math.isinf(kl):
        logger.warning(f"axis {reference.axis + 1}: KL to {approx.method} is infinite")
    return DistanceReport(
        axis=approx.axis,
        kl=kl,
        hellinger=_hellinger(pv, qv, h),
        grid_points=m,
        support=support,
        method=approx.method,
        infinite=math.isinf(kl),
    )


def local_maxima(marginal: MarginalApprox, m: int = METRIC_NODES) -> np.ndarray:
    """Locations of strict interior local maxima on the marginal's nodes."""
    x = marginal.nodes(m)
    v = marginal.density(x)
    peaks = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
    return x[peaks]
