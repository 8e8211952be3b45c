"""Clamped B-spline bases on [0, 1] with data-driven quantile knots.

The basis dimension follows the sample-size rule ``round(2 * n**(1/5))``,
interior knots sit at equally spaced empirical quantiles of the training
values, and the boundary knots 0 and 1 are repeated ``order`` times so the
first and last basis functions interpolate the endpoints.  Evaluation uses
the stable triangular de Boor recursion on the knot span containing x, and
exact basis integrals come from per-span Gauss-Legendre quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 4  # cubic pieces


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """A clamped B-spline basis on [0, 1].

    order: spline order (polynomial degree + 1); 4 gives cubics.
    num_basis: number of basis functions K.
    knots: non-decreasing vector of length K + order with 0 and 1 each
        repeated ``order`` times at the ends and the interior knots strictly
        increasing inside (0, 1).
    """

    order: int
    num_basis: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.ascontiguousarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.num_basis < self.order:
            raise ValueError(
                f"num_basis must be >= order, got {self.num_basis} < {self.order}"
            )
        if knots.shape != (self.num_basis + self.order,):
            raise ValueError(
                f"knot vector must have length num_basis + order = "
                f"{self.num_basis + self.order}, got {knots.shape}"
            )
        if np.any(np.diff(knots) < 0.0):
            raise ValueError("knots must be non-decreasing")
        if np.any(knots[: self.order] != 0.0) or np.any(knots[-self.order :] != 1.0):
            raise ValueError("boundary knots must be 0 and 1, each repeated `order` times")
        interior = knots[self.order : self.num_basis]
        if interior.size:
            if interior[0] <= 0.0 or interior[-1] >= 1.0:
                raise ValueError("interior knots must lie strictly inside (0, 1)")
            if np.any(np.diff(interior) <= 0.0):
                raise ValueError("interior knots must be strictly increasing")

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.order : self.num_basis]

    def to_dict(self) -> dict:
        return {
            "order": int(self.order),
            "num_basis": int(self.num_basis),
            "knots": [float(t) for t in self.knots],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplineBasis":
        return cls(
            order=int(payload["order"]),
            num_basis=int(payload["num_basis"]),
            knots=np.asarray(payload["knots"], dtype=float),
        )


def choose_num_basis(n: int, order: int = DEFAULT_ORDER) -> int:
    """Sample-size rule for the basis dimension.

    Returns 2 * n**(1/5) rounded to the nearest integer (halves away from
    zero) and clamped below at ``order`` so a valid basis always exists.
    """
    if n < 1:
        raise ValueError(f"need at least one sample to size a basis, got n={n}")
    raw = 2.0 * float(n) ** 0.2
    return max(int(math.floor(raw + 0.5)), order)


def build_basis(values, num_basis: int, order: int = DEFAULT_ORDER) -> SplineBasis:
    """Build a clamped basis with interior knots at empirical quantiles.

    Interior knots are the quantiles of ``values`` at levels
    i / (num_basis - order + 1) for i = 1 .. num_basis - order.  Tied or
    boundary-touching quantiles are collapsed, shrinking the basis; the
    reduction is logged rather than raised so near-degenerate predictors do
    not abort a fit.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("values must be non-empty")
    if not np.all(np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
        raise ValueError("values must lie in [0, 1]")
    if num_basis < order:
        raise ValueError(f"num_basis must be >= order, got {num_basis} < {order}")

    n_interior = num_basis - order
    if n_interior > 0:
        levels = np.arange(1, n_interior + 1) / float(n_interior + 1)
        quantiles = np.quantile(vals, levels)
        interior = np.unique(quantiles)
        interior = interior[(interior > 0.0) & (interior < 1.0)]
    else:
        interior = np.empty(0, dtype=float)

    if interior.size < n_interior:
        logger.warning(
            "collapsed %d tied/boundary interior knot(s); basis size reduced "
            "from %d to %d",
            n_interior - interior.size,
            num_basis,
            order + interior.size,
        )

    knots = np.concatenate([np.zeros(order), interior, np.ones(order)])
    return SplineBasis(order=order, num_basis=order + interior.size, knots=knots)


def eval_basis_matrix(basis: SplineBasis, x) -> np.ndarray:
    """Evaluate all basis functions at each point of ``x``.

    Returns an array of shape (len(x), num_basis).  Points outside [0, 1]
    are clamped; x = 1 is evaluated as the left limit so the last basis
    function owns the right endpoint.  Each row is non-negative, sums to 1,
    and has at most ``order`` nonzero entries.
    """
    t = basis.knots
    order = basis.order
    num_basis = basis.num_basis

    x = np.atleast_1d(np.asarray(x, dtype=float))
    x = np.clip(x, 0.0, 1.0)
    n = x.shape[0]

    # Knot span containing x; x == 1 lands past the end and is clipped back
    # to the last non-empty span, which evaluates the left limit.
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, order - 1, num_basis - 1)

    # Triangular de Boor recursion over the `order` local nonzero functions.
    vals = np.zeros((n, order))
    vals[:, 0] = 1.0
    left = np.zeros((n, order))
    right = np.zeros((n, order))
    for j in range(1, order):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = vals[:, r] / denom
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved

    out = np.zeros((n, num_basis))
    first = span - (order - 1)
    rows = np.arange(n)[:, None]
    cols = first[:, None] + np.arange(order)[None, :]
    out[rows, cols] = vals

    # Clamped bases interpolate at the endpoints; pin the two boundary rows
    # exactly rather than leaving the recursion's last-ulp rounding.
    at_zero = x == 0.0
    if np.any(at_zero):
        out[at_zero] = 0.0
        out[at_zero, 0] = 1.0
    at_one = x == 1.0
    if np.any(at_one):
        out[at_one] = 0.0
        out[at_one, -1] = 1.0
    return out


def eval_basis(basis: SplineBasis, x: float) -> np.ndarray:
    """Evaluate all basis functions at a single point."""
    return eval_basis_matrix(basis, [x])[0]


def basis_integrals(basis: SplineBasis) -> np.ndarray:
    """Integral of each basis function over [0, 1].

    Uses composite Gauss-Legendre quadrature per knot span with enough nodes
    to be exact for the piecewise polynomial degree (2 nodes for cubics).
    The entries are positive and sum to 1.
    """
    breakpoints = np.concatenate([[0.0], basis.interior_knots, [1.0]])
    n_nodes = (basis.order + 1) // 2  # exact for degree <= 2*n_nodes - 1
    nodes, weights = np.polynomial.legendre.leggauss(max(n_nodes, 1))

    a = breakpoints[:-1]
    b = breakpoints[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    # All quadrature points across all spans, with matching weights.
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()

    values = eval_basis_matrix(basis, points)
    return values.T @ w
