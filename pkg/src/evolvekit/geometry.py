"""Geometry of the cyclic evolution: direction simplex, reachable set, coordinates.

The motion runs at speed v in R^n and cycles through n+1 unit directions
tau_0, ..., tau_n, the vertices of a regular simplex inscribed in the unit
sphere:

    tau_i . tau_i = 1,   sum_i tau_i = 0,   tau_i . tau_j = -1/n  (i != j),

with tau_i supported on the first i+1 coordinates.  The positions reachable
by time t form the scaled simplex T_vt with vertices v*t*tau_i, and

    Vol T_vt = (sqrt(n+1))^(n+1) / ((sqrt n)^n n!) * (v t)^n.

Two coordinate systems on T_vt are provided:

* the n+1 affine coordinates y_1, ..., y_(n+1), each vanishing on one facet
  and positive inside (``to_y_coordinates``), together with
  z = (y_1 ... y_(n+1))^(1/(n+1)), the radial argument of the hyper-Bessel
  kernel used by the density module;

* barycentric weights w_0, ..., w_n with x = v t * sum_r w_r tau_r
  (``barycentric_coordinates``).  Physically w_r is the fraction of time a
  trajectory ending at x spent moving toward vertex r, so
  w_r = (1 + n <tau_r, x> / (v t)) / (n + 1).

Everything here is a pure function of its arguments; returned arrays are
written once and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "EvolutionParams",
    "Membership",
    "OutsideSupportError",
    "SimplexGeometry",
    "YCoordinates",
    "barycentric_coordinates",
    "build_simplex",
    "classify_batch",
    "support_contains",
    "support_margins",
    "to_y_coordinates",
    "vertices_at_time",
    "volume",
]

#: relative scale for boundary classification, applied to max(v*t, tiny)
EPS_GEO = 1e-9


class OutsideSupportError(ValueError):
    """Raised when a quantity is requested outside the reachable simplex."""


class Membership(Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"

    def __str__(self) -> str:  # CSV-friendly
        return self.value


@dataclass(frozen=True)
class EvolutionParams:
    """Model parameters: dimension n >= 1, switch rate lam > 0, speed v > 0."""

    n: int
    lam: float
    v: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension n must be an integer >= 1, got {self.n}")
        if not (self.lam > 0) or not math.isfinite(self.lam):
            raise ValueError(f"switch rate lam must be finite and > 0, got {self.lam}")
        if not (self.v > 0) or not math.isfinite(self.v):
            raise ValueError(f"speed v must be finite and > 0, got {self.v}")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class SimplexGeometry:
    """The n+1 unit direction vectors, rows of ``vertices`` (shape (n+1, n))."""

    n: int
    vertices: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class YCoordinates:
    """Affine facet coordinates y_1..y_(n+1) and the radial product root z.

    ``z = (y_1 ... y_(n+1))^(1/(n+1))`` is defined (non-None) only when every
    y_i >= 0, i.e. on the closed simplex; it vanishes exactly on the boundary.
    """

    y: np.ndarray = field(repr=False)
    z: float | None

    def require_z(self) -> float:
        if self.z is None:
            raise OutsideSupportError(
                "z undefined: some y coordinate is negative (point outside support)"
            )
        return self.z


@lru_cache(maxsize=None)
def _vertices(n: int) -> np.ndarray:
    V = np.zeros((n + 1, n))
    for i in range(n + 1):
        for j in range(1, n + 1):
            if j < i + 1:
                V[i, j - 1] = -math.sqrt(n * (n + 1) / ((n - j + 1) * (n - j + 2))) / n
            elif j == i + 1:
                V[i, j - 1] = math.sqrt((n + 1) * (n - i) / (n * (n - i + 1)))
    V.setflags(write=False)
    return V


@lru_cache(maxsize=None)
def _y_affine(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the facet coordinates: y = M @ x + s * (v*t).

    The x_j coefficients inside y_k come from telescoping square-root
    products; an empty product (reached at small n) is 1 by convention,
    which reproduces the n=1 line case y = (vt + x, vt - x).
    """
    M = np.zeros((n + 1, n))
    s = np.zeros(n + 1)
    M[0, 0] = 1.0
    s[0] = 1.0 / n

    def c(k: int, j: int) -> float:
        # telescoped value of sqrt((n-1)...(n-k+1) / ((n+1)...(n-k+3))) shifted to x_j
        return math.sqrt((n - k + 1) * (n - k + 2) / ((n - j + 1) * (n - j + 2)))

    for k in range(2, n + 1):
        M[k - 1, k - 1] = 1.0
        for j in range(1, k):
            M[k - 1, j - 1] = -c(k, j) / (n - k + 1)
        s[k - 1] = c(k, 1) / (n - k + 1)

    def b(j: int) -> float:
        return math.sqrt(2.0 / ((n - j + 1) * (n - j + 2)))

    for j in range(1, n):
        M[n, j - 1] = -b(j)
    M[n, n - 1] = -1.0
    s[n] = b(1) if n > 1 else 1.0
    M.setflags(write=False)
    s.setflags(write=False)
    return M, s


@lru_cache(maxsize=None)
def _upper_affine(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the remaining chained upper bounds: margins = U @ x + u * (v*t).

    Row 0 is vt - x_1; rows k-1 (k = 2..n-1) are the upper bounds on x_k.
    The upper bound on x_n equals y_(n+1) and lives in ``_y_affine``.
    """
    rows = max(n - 1, 0)
    U = np.zeros((rows, n))
    u = np.zeros(rows)
    if rows == 0:
        U.setflags(write=False)
        u.setflags(write=False)
        return U, u
    U[0, 0] = -1.0
    u[0] = 1.0

    def c(k: int, j: int) -> float:
        return math.sqrt((n - k + 1) * (n - k + 2) / ((n - j + 1) * (n - j + 2)))

    for k in range(2, n):
        U[k - 1, k - 1] = -1.0
        for j in range(1, k):
            U[k - 1, j - 1] = -c(k, j)
        u[k - 1] = c(k, 1)
    U.setflags(write=False)
    u.setflags(write=False)
    return U, u


def build_simplex(n: int) -> SimplexGeometry:
    """Direction set of the cyclic motion: n+1 regular-simplex unit vectors.

    Component j of tau_i is
        -sqrt(n(n+1) / ((n-j+1)(n-j+2))) / n   for j < i+1,
        sqrt((n+1)(n-i) / (n(n-i+1)))          for j = i+1,
        0                                      for j > i+1.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"dimension n must be an integer >= 1, got {n}")
    return SimplexGeometry(n=int(n), vertices=_vertices(int(n)))


def _as_points(params: EvolutionParams, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != params.n:
        raise ValueError(f"expected points of dimension {params.n}, got shape {X.shape}")
    return X


def support_margins(params: EvolutionParams, x, t: float) -> np.ndarray:
    """Signed margins of the 2n chained support inequalities, batch-aware.

    Rows are points, columns the inequalities: first the n+1 facet
    coordinates y_i (lower bounds plus the last upper bound), then the n-1
    remaining chained upper bounds.  All margins positive means inside.
    """
    X = _as_points(params, x)
    n = params.n
    M, s = _y_affine(n)
    U, u = _upper_affine(n)
    vt = params.v * t
    Y = X @ M.T + s * vt
    if U.shape[0]:
        extra = X @ U.T + u * vt
        return np.concatenate([Y, extra], axis=1)
    return Y


def classify_batch(params: EvolutionParams, x, t: float) -> np.ndarray:
    """Vectorized membership test against the reachable simplex at time t.

    Returns an array of ``Membership``.  Boundary means some inequality is
    within EPS_GEO * max(v*t, tiny) of equality while none is violated beyond
    that tolerance.  At t = 0 the simplex degenerates: only the origin is
    boundary, everything else outside.
    """
    X = _as_points(params, x)
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    if t == 0:
        at_origin = np.max(np.abs(X), axis=1) == 0.0
        out = np.where(at_origin, Membership.BOUNDARY, Membership.OUTSIDE)
        return out
    margins = support_margins(params, X, t)
    eps = EPS_GEO * max(params.v * t, np.finfo(float).tiny)
    lo = margins.min(axis=1)
    result = np.empty(len(X), dtype=object)
    result[lo > eps] = Membership.INSIDE
    result[(lo <= eps) & (lo >= -eps)] = Membership.BOUNDARY
    result[lo < -eps] = Membership.OUTSIDE
    return result


def support_contains(params: EvolutionParams, x, t: float) -> Membership:
    """Classify a single point as inside, boundary or outside of T_vt."""
    return classify_batch(params, np.atleast_1d(np.asarray(x, dtype=float)), t)[0]


def to_y_coordinates(params: EvolutionParams, x, t: float) -> YCoordinates:
    """Facet coordinates of a point.

    y_1 = vt/n + x_1; each following y_k subtracts the chained linear
    combination of x_1..x_(k-1) from x_k; y_(n+1) is the last upper-bound
    margin.  All are affine in (x, t) and positive exactly inside T_vt.
    """
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    X = _as_points(params, x)
    if X.shape[0] != 1:
        raise ValueError("to_y_coordinates takes a single point")
    M, s = _y_affine(params.n)
    y = (X @ M.T + s * (params.v * t))[0]
    y.setflags(write=False)
    if np.min(y) >= 0.0:
        if np.any(y == 0.0):
            z = 0.0
        else:
            z = float(np.exp(np.mean(np.log(y))))
    else:
        z = None
    return YCoordinates(y=y, z=z)


def volume(params: EvolutionParams, t: float) -> float:
    """Volume of the reachable simplex, (sqrt(n+1))^(n+1) (vt)^n / ((sqrt n)^n n!)."""
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    n = params.n
    return (
        math.sqrt(n + 1) ** (n + 1)
        * (params.v * t) ** n
        / (math.sqrt(n) ** n * math.factorial(n))
    )


def vertices_at_time(params: EvolutionParams, t: float) -> np.ndarray:
    """Extreme points v*t*tau_i of the reachable simplex (unswitched endpoints)."""
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    return params.v * t * _vertices(params.n)


def barycentric_coordinates(params: EvolutionParams, x, t: float) -> np.ndarray:
    """Sojourn-fraction weights w_r of points, shape (N, n+1), rows sum to 1.

    w_r(x) = (1 + n <tau_r, x> / (vt)) / (n+1); all weights are nonnegative
    exactly on the closed simplex.  Requires t > 0.
    """
    if not t > 0:
        raise ValueError(f"time t must be > 0, got {t}")
    X = _as_points(params, x)
    n = params.n
    V = _vertices(n)
    return (1.0 + (n / (params.v * t)) * (X @ V.T)) / (n + 1)
