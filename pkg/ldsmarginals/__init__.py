"""Marginal density approximation with low-discrepancy point sets.

Approximates the one-dimensional marginals of a multi-dimensional density
from evaluations on a Korobov lattice: the evaluations are projected onto
each axis, averaged over equal-width partitions, and fitted by a quadratic
log-density with an optional polynomial correction. Grid, single-polynomial
and half-Gaussian alternatives, oracles and distance metrics are included
for comparison.
"""

__version__ = "0.1.0"
