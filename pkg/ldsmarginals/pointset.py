"""Deterministic point sets over the unit cube and rectangular regions.

Provides equally spaced grids, Korobov lattices (plain and extensible),
thinning of extensible lattices by repeated halving, a figure-of-merit
search for the generating constant, and the affine scaling of unit-cube
points into an integration region [a, b).

Korobov coordinates are formed from exact integer numerators
((i-1) * alpha**(j-1) mod N) and divided by N once, so two lattices can be
compared exactly and a thinned lattice reproduces the smaller lattice bit
for bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BudgetExceededError, InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_POINT_BUDGET = 10**7


class PointSetKind(str, Enum):
    """Construction recipe of a point set."""
    GRID = "grid"
    KOROBOV = "korobov"
    EXTENSIBLE_KOROBOV = "extensible-korobov"


@dataclass(frozen=True)
class IntegrationRegion:
    """Rectangular region [lower, upper) with lower_k < upper_k on every axis."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise InvalidArgumentError(
                f"region bounds must be non-empty vectors of equal length, "
                f"got {lower.size} and {upper.size}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidArgumentError("region bounds must be finite")
        if np.any(lower >= upper):
            raise InvalidArgumentError(
                f"region needs lower < upper on every axis, got {lower} and {upper}"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def axis(self, k: int) -> tuple[float, float]:
        """Return (a_k, b_k) for a 0-based axis index."""
        return float(self.lower[k]), float(self.upper[k])

    def scale(self, x: np.ndarray) -> np.ndarray:
        """Map unit-cube coordinates to the region: u = a + (b - a) x."""
        return self.lower + self.widths * np.asarray(x, dtype=float)

    def unscale(self, u: np.ndarray) -> np.ndarray:
        """Inverse of scale()."""
        return (np.asarray(u, dtype=float) - self.lower) / self.widths

    def contains(self, u: np.ndarray) -> np.ndarray:
        """Closed-open membership test, row-wise for an (N, s) array."""
        u = np.atleast_2d(u)
        return np.all((u >= self.lower) & (u < self.upper), axis=1)


@dataclass(frozen=True)
class PointSet:
    """An ordered set of N points in s dimensions with construction metadata.

    ``region`` is None while the points live in the unit cube [0, 1)^s.
    ``numerators`` holds the exact integer numerators of Korobov kinds.
    """
    points: np.ndarray
    kind: PointSetKind
    big_n: int
    dim: int
    n_per_axis: int | None = None
    alpha: int | None = None
    region: IntegrationRegion | None = None
    numerators: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_lattice(self) -> bool:
        return self.kind in (PointSetKind.KOROBOV, PointSetKind.EXTENSIBLE_KOROBOV)

    @property
    def domain(self) -> str:
        return "unit-cube" if self.region is None else "region"

    def __len__(self) -> int:
        return self.big_n


def _check_budget(count: int, budget: int) -> None:
    if count > budget:
        raise BudgetExceededError(
            f"{count} points requested, the point budget is {budget}"
        )


def generate_grid(n: int, s: int, budget: int = DEFAULT_POINT_BUDGET) -> PointSet:
    """Equally spaced grid {(g_1/n, ..., g_s/n) : g_j = 0, ..., n-1}.

    Points are returned in lexicographic order of (g_1, ..., g_s).
    """
    if n < 2:
        raise InvalidArgumentError(f"a grid needs n >= 2 points per axis, got {n}")
    if s < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {s}")
    _check_budget(n**s, budget)

    indices = np.indices((n,) * s).reshape(s, -1).T
    return PointSet(
        points=indices / n,
        kind=PointSetKind.GRID,
        big_n=n**s,
        dim=s,
        n_per_axis=n,
    )


def _korobov_numerators(big_n: int, s: int, alpha: int) -> np.ndarray:
    # alpha powers reduced mod N with Python ints, so nothing overflows
    gen = np.array([pow(alpha, j, big_n) for j in range(s)], dtype=np.int64)
    i = np.arange(big_n, dtype=np.int64)
    return (i[:, None] * gen[None, :]) % big_n


def generate_korobov(big_n: int, s: int, alpha: int, extensible: bool = False,
                     budget: int = DEFAULT_POINT_BUDGET) -> PointSet:
    """Korobov lattice {(i-1)/N (1, alpha, ..., alpha^(s-1)) mod 1 : i = 1..N}."""
    if big_n < 2:
        raise InvalidArgumentError(f"a lattice needs N >= 2 points, got {big_n}")
    if s < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {s}")
    if not 1 <= alpha <= big_n - 1:
        raise InvalidArgumentError(
            f"generating constant must lie in [1, {big_n - 1}], got {alpha}"
        )
    _check_budget(big_n, budget)
    if math.gcd(alpha, big_n) != 1:
        logger.warning(
            f"gcd({alpha}, {big_n}) != 1: the lattice is not projection regular"
        )

    numerators = _korobov_numerators(big_n, s, alpha)
    kind = PointSetKind.EXTENSIBLE_KOROBOV if extensible else PointSetKind.KOROBOV
    return PointSet(
        points=numerators / big_n,
        kind=kind,
        big_n=big_n,
        dim=s,
        alpha=alpha,
        numerators=numerators,
    )


def thin_lattice(ps: PointSet, halvings: int) -> PointSet:
    """Keep the first row and every 2**halvings-th row after it.

    For a lattice with N = 2**halvings * M points the result equals the
    M-point lattice generated by alpha mod M, point for point.
    """
    if not ps.is_lattice or ps.numerators is None:
        raise InvalidArgumentError("only Korobov lattices can be thinned")
    if halvings < 1:
        raise InvalidArgumentError(f"halvings must be at least 1, got {halvings}")
    step = 2**halvings
    if ps.big_n % step:
        raise InvalidArgumentError(
            f"N = {ps.big_n} is not divisible by 2^{halvings}"
        )

    new_n = ps.big_n // step
    # (m * step * g) mod (step * M) == step * ((m * g) mod M)
    numerators = ps.numerators[::step] // step
    unit = numerators / new_n
    points = unit if ps.region is None else ps.region.scale(unit)
    reduced = ps.alpha % new_n
    return PointSet(
        points=points,
        kind=ps.kind,
        big_n=new_n,
        dim=ps.dim,
        alpha=reduced if reduced else ps.alpha,
        region=ps.region,
        numerators=numerators,
    )


def lattice_merit(big_n: int, s: int, alpha: int) -> float:
    """Equal-weight P2 figure of merit of a Korobov lattice (smaller is better).

    P2 = mean_i prod_j (1 + 2 pi^2 B2(x_ij)) - 1 with B2(x) = x^2 - x + 1/6.
    B2(k/N) is formed from the integer 6k^2 - 6kN + N^2, which is symmetric
    under k -> N - k, so mirrored constants give identical merits.
    """
    k = _korobov_numerators(big_n, s, alpha)
    b2_num = 6 * k * k - 6 * k * big_n + big_n * big_n
    factors = 1.0 + (math.pi**2 / 3.0) * (b2_num / float(big_n * big_n))
    products = np.prod(factors, axis=1)
    return math.fsum(products.tolist()) / big_n - 1.0


def search_generating_constant(big_n: int, s: int) -> int:
    """Exhaustive search for the coprime alpha minimizing the P2 merit.

    Ties go to the smallest alpha.
    """
    if big_n < 4:
        raise InvalidArgumentError(f"constant search needs N >= 4, got {big_n}")
    if s < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {s}")

    best_alpha, best_merit = 0, math.inf
    for alpha in range(1, big_n):
        if math.gcd(alpha, big_n) != 1:
            continue
        merit = lattice_merit(big_n, s, alpha)
        if merit < best_merit:
            best_alpha, best_merit = alpha, merit
    logger.debug(f"best constant for N={big_n}, s={s}: {best_alpha} (P2={best_merit:.6g})")
    return best_alpha


def scale_to_region(ps: PointSet, region: IntegrationRegion) -> PointSet:
    """Map a unit-cube point set into [a, b) coordinate-wise."""
    if ps.region is not None:
        raise InvalidArgumentError("point set is already scaled to a region")
    if region.dim != ps.dim:
        raise InvalidArgumentError(
            f"dimension mismatch: point set has {ps.dim} axes, region has {region.dim}"
        )
    return PointSet(
        points=region.scale(ps.points),
        kind=ps.kind,
        big_n=ps.big_n,
        dim=ps.dim,
        n_per_axis=ps.n_per_axis,
        alpha=ps.alpha,
        region=region,
        numerators=ps.numerators,
    )
