"""Hyper-Bessel kernel, its series coefficients, and truncated-Taylor jets.

The kernel of order n+1 is the entire series

    I(w) = sum_{k>=0} (w/(n+1))^((n+1)k) / (k!)^(n+1),

which reduces to the classical modified Bessel I_0 at n = 1 and solves the
radial equation (z d/dz)^(n+1) g = (alpha z)^(n+1) g for g(z) = I(alpha z).
Expanded in the facet-coordinate product, I(alpha z) with
z = (y_1...y_(n+1))^(1/(n+1)) becomes sum_k c_k (y_1...y_(n+1))^k with

    c_k = (alpha/(n+1))^((n+1)k) / (k!)^(n+1),

so the coefficients obey the exact recurrence
c_k * k^(n+1) = (alpha/(n+1))^(n+1) * c_(k-1), the termwise form of the
product-derivative equation.

Time derivatives of the composite t -> I(alpha z(x, t)) are taken with
truncated-Taylor jets (exact polynomial arithmetic up to the needed order)
rather than finite differences; finite differences are kept only as the
independent cross-check in ``hyper_bessel_ode_residual`` and the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .geometry import EvolutionParams, OutsideSupportError

__all__ = [
    "DerivedConstants",
    "HyperBesselEval",
    "TimeJet",
    "eval_hyper_bessel",
    "hyper_bessel_ode_residual",
    "jet_of_hyper_bessel",
    "series_coefficient",
    "tuned_ode_residual",
]

_MAX_TERMS = 1000
_LOG_HUGE = 700.0  # exp beyond this overflows a double


@dataclass(frozen=True)
class HyperBesselEval:
    """One kernel evaluation with its truncation diagnostics."""

    order: int
    argument: float
    value: float
    terms_used: int
    truncation_bound: float


@dataclass(frozen=True)
class DerivedConstants:
    """Constants tying the model parameters to the kernel and the density.

    alpha scales the radial coordinate, prefactor normalizes the density,
    and pde_constant is the right-hand coefficient of the product-derivative
    equation.  The algebraic identity pde_constant = (alpha/(n+1))^(n+1) is
    checked at construction instead of being assumed.
    """

    alpha: float
    prefactor: float
    pde_constant: float

    @classmethod
    def from_params(cls, params: EvolutionParams) -> "DerivedConstants":
        n, lam, v = params.n, params.lam, params.v
        root = math.exp(math.log(2 * n + 2) / (2 * n + 2))
        alpha = (lam / v) * math.sqrt(n * (n + 1)) / root
        prefactor = math.sqrt(n) ** n / (math.sqrt(n + 1) ** (n + 1) * v**n)
        pde_constant = (
            (lam / v) ** (n + 1) * (n / (n + 1)) ** ((n + 1) / 2) / math.sqrt(2 * n + 2)
        )
        check = (alpha / (n + 1)) ** (n + 1)
        if not math.isclose(pde_constant, check, rel_tol=1e-12):
            raise AssertionError(
                f"pde constant mismatch: {pde_constant} vs (alpha/(n+1))^(n+1) = {check}"
            )
        return cls(alpha=alpha, prefactor=prefactor, pde_constant=pde_constant)


def eval_hyper_bessel(n: int, w: float, tol: float = 1e-12) -> HyperBesselEval:
    """Sum the kernel series at argument w >= 0.

    Terms are accumulated through the exact ratio
    t_(k+1)/t_k = (w/(n+1))^(n+1) / (k+1)^(n+1), which keeps intermediate
    magnitudes bounded; summation stops once the geometric tail bound drops
    below tol times the partial sum.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"order parameter n must be an integer >= 1, got {n}")
    if not (0 < tol <= 1e-6):
        raise ValueError(f"tol must be in (0, 1e-6], got {tol}")
    if not math.isfinite(w):
        raise ValueError(f"argument must be finite, got {w}")
    if w < 0:
        raise ValueError(f"argument must be >= 0, got {w}")
    base = (w / (n + 1)) ** (n + 1)
    total = 1.0
    term = 1.0
    k = 0
    while k < _MAX_TERMS:
        ratio = base / (k + 1) ** (n + 1)
        nxt = term * ratio
        if ratio < 1.0:
            tail = nxt / (1.0 - ratio)
            if tail < tol * total:
                return HyperBesselEval(
                    order=n + 1,
                    argument=w,
                    value=total,
                    terms_used=k + 1,
                    truncation_bound=tail,
                )
        term = nxt
        total += term
        if not math.isfinite(total):
            raise OverflowError(f"kernel series overflowed at w={w}, n={n}")
        k += 1
    raise OverflowError(f"kernel series did not converge within {_MAX_TERMS} terms (w={w})")


def _log_series_coefficient(n: int, alpha: float, k: int) -> float:
    return (n + 1) * (k * math.log(alpha / (n + 1)) - gammaln(k + 1)) if k else 0.0


def series_coefficient(n: int, alpha: float, k: int) -> float:
    """Coefficient c_k of (y_1...y_(n+1))^k in the expanded kernel.

    Evaluated as exp of (n+1) * (k log(alpha/(n+1)) - log k!) to keep large
    n and k representable; signals when the magnitude leaves double range.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"index k must be an integer >= 0, got {k}")
    if not (alpha > 0) or not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite and > 0, got {alpha}")
    logc = _log_series_coefficient(n, alpha, k)
    if abs(logc) > _LOG_HUGE:
        raise OverflowError(
            f"series coefficient magnitude exp({logc:.1f}) outside double range "
            f"(n={n}, alpha={alpha}, k={k})"
        )
    return math.exp(logc)


@dataclass(frozen=True)
class TimeJet:
    """Truncated Taylor expansion sum_m a_m eps^m around a base time.

    Arithmetic is exact polynomial arithmetic truncated at the jet degree;
    the m-th derivative at the base point is m! * a_m.
    """

    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=float)
        if coeff.ndim != 1 or coeff.size < 1:
            raise ValueError("jet coefficients must be a nonempty 1-D array")
        coeff = coeff.copy()
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    @classmethod
    def constant(cls, value: float, degree: int) -> "TimeJet":
        c = np.zeros(degree + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def affine(cls, value: float, slope: float, degree: int) -> "TimeJet":
        if degree < 1:
            raise ValueError("affine jet needs degree >= 1")
        c = np.zeros(degree + 1)
        c[0] = value
        c[1] = slope
        return cls(c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def derivative(self, m: int) -> float:
        """m-th time derivative at the base point."""
        if not 0 <= m <= self.degree:
            raise ValueError(f"derivative order {m} outside jet degree {self.degree}")
        return math.factorial(m) * float(self.coefficients[m])

    def __add__(self, other: "TimeJet") -> "TimeJet":
        self._check(other)
        return TimeJet(self.coefficients + other.coefficients)

    def __mul__(self, other):
        if isinstance(other, TimeJet):
            self._check(other)
            return TimeJet(_jet_mul(self.coefficients, other.coefficients))
        return TimeJet(self.coefficients * float(other))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TimeJet":
        if int(k) != k or k < 0:
            raise ValueError(f"jet power must be an integer >= 0, got {k}")
        out = TimeJet.constant(1.0, self.degree)
        for _ in range(int(k)):
            out = out * self
        return out

    def _check(self, other: "TimeJet") -> None:
        if other.degree != self.degree:
            raise ValueError(f"jet degree mismatch: {self.degree} vs {other.degree}")


def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of jets truncated to the common degree; last axis is the slot axis."""
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    deg = a.shape[-1] - 1
    for m in range(deg + 1):
        acc = 0.0
        for u in range(m + 1):
            acc = acc + a[..., u] * b[..., m - u]
        out[..., m] = acc
    return out


def _kernel_jet_batch(
    n: int, alpha: float, base: np.ndarray, slopes: np.ndarray, tol: float
) -> np.ndarray:
    """Degree-n jets of t -> I(alpha (y_1...y_(n+1))^(1/(n+1))) for a batch.

    ``base`` has shape (N, n+1) with the y values at the base time (all >= 0),
    ``slopes`` holds the constant dy_i/dt.  Returns jets of shape (N, n+1).

    The series sum_k c_k P^k in the product jet P always includes terms up to
    k = n, which is exact for boundary base points (where P has positive
    valuation in eps); beyond that the usual next-term stopping rule applies
    to the value slot.
    """
    deg = n
    npts = base.shape[0]
    P = np.zeros((npts, deg + 1))
    P[:, 0] = 1.0
    factor = np.zeros((npts, deg + 1))
    for i in range(n + 1):
        factor[:, :] = 0.0
        factor[:, 0] = base[:, i]
        factor[:, 1] = slopes[i]
        P = _jet_mul(P, factor)
    G = np.zeros((npts, deg + 1))
    Pk = np.zeros((npts, deg + 1))
    Pk[:, 0] = 1.0
    scale0 = 0.0
    for k in range(_MAX_TERMS):
        logc = _log_series_coefficient(n, alpha, k)
        ck = math.exp(logc) if logc > -_LOG_HUGE else 0.0
        G += ck * Pk
        scale0 = max(scale0, float(np.max(np.abs(G[:, 0]))), 1e-300)
        Pk = _jet_mul(Pk, P)
        nxt = ck if k + 1 >= _MAX_TERMS else math.exp(
            max(_log_series_coefficient(n, alpha, k + 1), -_LOG_HUGE)
        )
        if k >= n and nxt * float(np.max(np.abs(Pk[:, 0]))) < tol * scale0:
            break
    return G


def jet_of_hyper_bessel(
    n: int, alpha: float, y_jets: list[TimeJet], tol: float = 1e-12
) -> TimeJet:
    """Degree-n jet in time of the kernel composed with affine facet coordinates.

    Each input jet must be affine in the expansion variable (slots beyond the
    first derivative zero) with a nonnegative base value; a negative base
    value means the point left the support.
    """
    if len(y_jets) != n + 1:
        raise ValueError(f"expected {n + 1} coordinate jets, got {len(y_jets)}")
    if not (0 < tol <= 1e-6):
        raise ValueError(f"tol must be in (0, 1e-6], got {tol}")
    base = np.empty((1, n + 1))
    slopes = np.empty(n + 1)
    for i, jet in enumerate(y_jets):
        c = jet.coefficients
        if c.size > 2 and np.any(c[2:] != 0.0):
            raise ValueError("coordinate jets must be affine in time")
        base[0, i] = c[0]
        slopes[i] = c[1] if c.size > 1 else 0.0
    if np.any(base < 0):
        raise OutsideSupportError("negative facet coordinate: point outside support")
    G = _kernel_jet_batch(n, alpha, base, slopes, tol)
    return TimeJet(G[0])


def _radial_operator_grid(values: np.ndarray, zs: np.ndarray, h: float) -> np.ndarray:
    """One central-difference application of z d/dz on a uniform grid."""
    inner = zs[1:-1]
    return inner * (values[2:] - values[:-2]) / (2.0 * h)


def hyper_bessel_ode_residual(n: int, alpha: float, z: float, h: float) -> float:
    """Relative residual of (z d/dz)^(n+1) g = (alpha z)^(n+1) g at g = I(alpha .).

    The operator is applied n+1 times by nested central differences of step h,
    so the argument must stay positive across the stencil: z > (n+1) h > 0.
    The right side uses the derived-constants identity
    (alpha z)^(n+1) = pde_constant * ((n+1) z)^(n+1).
    """
    if not (h > 0):
        raise ValueError(f"step h must be > 0, got {h}")
    if z - (n + 1) * h <= 0:
        raise ValueError(f"step too large: need z > (n+1) h, got z={z}, h={h}")
    m = n + 1
    offsets = np.arange(-m, m + 1)
    zs = z + offsets * h
    vals = np.array([eval_hyper_bessel(n, alpha * zz, 1e-14).value for zz in zs])
    for _ in range(m):
        vals = _radial_operator_grid(vals, zs, h)
        zs = zs[1:-1]
    lhs = vals[0]
    g = eval_hyper_bessel(n, alpha * z, 1e-14).value
    pde_constant = (alpha / (n + 1)) ** (n + 1)
    rhs = pde_constant * ((n + 1) * z) ** (n + 1) * g
    return abs(lhs - rhs) / abs(g)


def tuned_ode_residual(
    n: int, alpha: float, z: float, h0: float | None = None, halvings: int = 6
) -> float:
    """Best residual over successively halved steps (Richardson-style tuning)."""
    if h0 is None:
        h0 = min(0.05 * z / (n + 1), 0.05)
    best = math.inf
    h = h0
    for _ in range(halvings):
        if z - (n + 1) * h > 0:
            best = min(best, hyper_bessel_ode_residual(n, alpha, z, h))
        h /= 2.0
    return best
