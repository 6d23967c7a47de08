"""Endpoint law of the cyclic evolution: exact density and integral identities.

Let N(t) be the Poisson(lam) switch count.  With fewer than n switches the
endpoint lies on a lower-dimensional face of the reachable simplex, so the
law splits into a singular part of mass

    P{boundary} = exp(-lam t) sum_{k<n} (lam t)^k / k!

and an absolutely continuous part of mass ``ac_mass`` = P{N(t) >= n} carried
by the open simplex.

The density of the absolutely continuous part has a closed form.  Condition
on N(t) = k >= n and on the (uniform) initial direction: the event times are
uniform order statistics, so the n+1 per-direction sojourn times are an
aggregated Dirichlet vector whose integer weights advance cyclically.
Summing the Poisson mixture and averaging the initial direction collapses,
in the scaled sojourn variables

    u_r = lam * t * w_r      (w_r the barycentric sojourn fractions),
    p   = u_0 u_1 ... u_n,

to a finite combination of hyper-Bessel slice series

    h_b(p) = sum_{q>=1} p^(q-1) / ((q-1)!^b q!^(n+1-b)),    b = 1..n+1,

namely

    f(x, t) = prefactor * exp(-lam t) * lam^n / (n+1)
              * sum_{m=0}^{n} e_m(u) h_(n+1-m)(p),

where e_m(u) sums the products of u over the n+1 cyclic index windows of
length m (e_0 = n+1) and prefactor = (sqrt n)^n / ((sqrt(n+1))^(n+1) v^n).
The m-th summand is exposed as ``operator_terms[m]``; on the line (n = 1)
it equals lam^(1-m) d^m/dt^m applied to the kernel and the whole expression
reduces to the classical telegraph-process density.

``jet_operator_density`` evaluates the plain time-operator composite
prefactor * exp(-lam t) * [lam^n + lam^(n-1) d/dt + ... + d^n/dt^n] I.
It coincides with ``density`` for n = 1 but does not integrate to
``ac_mass`` for n >= 2 (the moving-boundary flux of d/dt I does not vanish),
so it is kept only as a diagnostic; the verification suite reports the
comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EvolutionParams,
    Membership,
    barycentric_coordinates,
    classify_batch,
    support_contains,
    volume,
    _y_affine,
)
from .special_functions import DerivedConstants, _kernel_jet_batch

__all__ = [
    "DensityValue",
    "ac_mass",
    "analytic_bessel_integral",
    "boundary_probability",
    "density",
    "density_batch",
    "jet_operator_density",
    "normalization_series_identity",
    "remark_constant_check",
]

_SERIES_CAP = 2000


@dataclass(frozen=True)
class DensityValue:
    """Density at one point: total value, per-window contributions, location."""

    value: float
    operator_terms: np.ndarray = field(repr=False)
    location: Membership


def boundary_probability(params: EvolutionParams, t: float) -> float:
    """Mass of the singular component, exp(-lam t) sum_{k<n} (lam t)^k / k!.

    Equals 1 at t = 0 and decreases strictly to 0; the k-th summand is the
    probability of sitting on a k-dimensional face of the reachable simplex.
    """
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    lt = params.lam * t
    total = 0.0
    term = 1.0
    for k in range(params.n):
        if k:
            term *= lt / k
        total += term
    return math.exp(-lt) * total


def ac_mass(params: EvolutionParams, t: float) -> float:
    """Mass of the absolutely continuous component, P{N(t) >= n}."""
    return 1.0 - boundary_probability(params, t)


def _h_slices(n: int, p: np.ndarray, tol: float) -> list[np.ndarray]:
    """The n+1 slice series h_b(p), b = 1..n+1, for a batch of products p >= 0.

    Term ratio t_(q+1)/t_q = p / (q^b (q+1)^(n+1-b)) keeps magnitudes tame;
    each series starts at 1 and the factorial powers dominate quickly.
    """
    out = []
    pmax = float(np.max(p, initial=0.0))
    for b in range(1, n + 2):
        term = np.ones_like(p)
        acc = term.copy()
        tmax = 1.0
        amax = 1.0
        q = 1
        while q < _SERIES_CAP:
            scale = 1.0 / (q**b * (q + 1) ** (n + 1 - b))
            term = term * p * scale
            acc += term
            tmax *= pmax * scale
            amax = max(amax, tmax)
            q += 1
            if tmax < tol * amax:
                break
        out.append(acc)
    return out


def _window_sums(u: np.ndarray) -> np.ndarray:
    """Cyclic-window products e_m(u), m = 0..n, shape (n+1, N); e_0 = n+1."""
    nplus1 = u.shape[1]
    out = np.empty((nplus1, u.shape[0]))
    out[0] = nplus1
    windows = np.ones_like(u)
    for m in range(1, nplus1):
        for i0 in range(nplus1):
            windows[:, i0] *= u[:, (i0 + m - 1) % nplus1]
        out[m] = windows.sum(axis=1)
    return out


def density_batch(
    params: EvolutionParams, x, t: float, tol: float = 1e-12
) -> np.ndarray:
    """Density of the absolutely continuous component at points x, zero off
    the open simplex.  ``x`` has shape (N, n); returns shape (N,)."""
    if not t > 0:
        raise ValueError(f"time t must be > 0, got {t}")
    X = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("coordinates must be finite")
    if X.ndim == 1:
        X = X[None, :]
    loc = classify_batch(params, X, t)
    inside = loc == Membership.INSIDE
    values = np.zeros(len(X))
    if inside.any():
        terms = _window_terms(params, X[inside], t, tol)
        consts = DerivedConstants.from_params(params)
        values[inside] = (
            consts.prefactor * math.exp(-params.lam * t) * terms.sum(axis=0)
        )
    return values


def _window_terms(
    params: EvolutionParams, X: np.ndarray, t: float, tol: float
) -> np.ndarray:
    """Per-window contributions, shape (n+1, N); row m generalizes
    lam^(n-m) d^m/dt^m of the kernel (equality holds at n = 1)."""
    n = params.n
    w = barycentric_coordinates(params, X, t)
    u = np.clip(params.lam * t * w, 0.0, None)
    p = np.prod(u, axis=1)
    slices = _h_slices(n, p, tol)
    e = _window_sums(u)
    scale = params.lam**n / (n + 1)
    terms = np.empty_like(e)
    for m in range(n + 1):
        terms[m] = scale * e[m] * slices[n - m]
    return terms


def density(
    params: EvolutionParams, x, t: float, tol: float = 1e-12
) -> DensityValue:
    """Density of the absolutely continuous component at one point.

    Inside the open simplex the value is
    prefactor * exp(-lam t) * sum(operator_terms); on the boundary and
    outside the absolutely continuous density is 0 (the boundary carries
    the singular mass, see ``boundary_probability``).
    """
    if not t > 0:
        raise ValueError(f"time t must be > 0, got {t}")
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    if not np.all(np.isfinite(X)):
        raise ValueError("coordinates must be finite")
    loc = support_contains(params, X[0], t)
    if loc is not Membership.INSIDE:
        return DensityValue(value=0.0, operator_terms=np.zeros(params.n + 1), location=loc)
    terms = _window_terms(params, X, t, tol)[:, 0]
    consts = DerivedConstants.from_params(params)
    value = consts.prefactor * math.exp(-params.lam * t) * float(terms.sum())
    terms.setflags(write=False)
    return DensityValue(value=value, operator_terms=terms, location=loc)


def jet_operator_density(
    params: EvolutionParams, x, t: float, tol: float = 1e-12
) -> float:
    """Time-operator composite
    prefactor * exp(-lam t) * sum_m lam^(n-m) d^m/dt^m I(alpha z(x, t)),
    with derivatives taken by jets.  Diagnostic only: equals ``density``
    for n = 1, but is not the endpoint density for n >= 2."""
    if not t > 0:
        raise ValueError(f"time t must be > 0, got {t}")
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    if support_contains(params, X[0], t) is not Membership.INSIDE:
        return 0.0
    n = params.n
    M, s = _y_affine(n)
    base = X @ M.T + s * (params.v * t)
    slopes = s * params.v
    consts = DerivedConstants.from_params(params)
    G = _kernel_jet_batch(n, consts.alpha, base, slopes, tol)
    op = sum(
        params.lam ** (n - m) * math.factorial(m) * G[0, m] for m in range(n + 1)
    )
    return consts.prefactor * math.exp(-params.lam * t) * op


def analytic_bessel_integral(
    params: EvolutionParams, t: float, tol: float = 1e-12
) -> float:
    """Closed-form integral of the kernel over the reachable simplex,

        (v/lam)^n (sqrt(n+1))^(n+1) / (sqrt n)^n
            * sum_{k>=0} (lam t)^((n+1)(k+1)-1) / ((n+1)(k+1)-1)!.

    At n = 1 the series is sinh(lam t); the factorials make truncation cheap.
    """
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    n = params.n
    lt = params.lam * t
    if lt == 0.0:
        return 0.0
    coeff = (params.v / params.lam) ** n * math.sqrt(n + 1) ** (n + 1) / math.sqrt(n) ** n
    total = 0.0
    e = n  # first exponent, (n+1)*1 - 1
    term = lt**n / math.factorial(n)
    for _ in range(_SERIES_CAP):
        total += term
        for _ in range(n + 1):  # advance exponent by n+1
            e += 1
            term *= lt / e
        if term < tol * total:
            break
    return coeff * total


def normalization_series_identity(params: EvolutionParams, t: float) -> float:
    """Closed-form total mass of the density, checked against ``ac_mass``.

    Applying sum_m lam^(n-m) d^m/dt^m termwise to the kernel-integral series
    scatters its exponents so that every power of lam*t appears exactly once;
    subtracting the per-order volume-derivative corrections removes exactly
    the powers below n.  What remains is

        prefactor * exp(-lam t) * v^n (sqrt(n+1))^(n+1)/(sqrt n)^n
            * sum_{e>=n} (lam t)^e / e!

    which must equal the Poisson tail P{N(t) >= n}.  The exponent bookkeeping
    is verified structurally, then the value is compared with ``ac_mass`` to
    1e-12 relative; a mismatch raises.
    """
    if t < 0:
        raise ValueError(f"time t must be >= 0, got {t}")
    n = params.n
    lt = params.lam * t

    # termwise derivative exponents: the m-th operator order turns the series
    # exponent (n+1)j - 1 into (n+1)j - 1 - m for every j >= 1
    blocks = max(4, math.ceil((lt + 60.0) / (n + 1)))
    counts: dict[int, int] = {}
    for m in range(n + 1):
        for j in range(1, blocks + 1):
            e = (n + 1) * j - 1 - m
            if e >= 0:
                counts[e] = counts.get(e, 0) + 1
    full = (n + 1) * blocks - 1 - n
    for e in range(full + 1):
        if counts.get(e, 0) != 1:
            raise AssertionError(f"exponent {e} covered {counts.get(e, 0)} times")

    # corrections remove one copy of each exponent below n (volume flux terms)
    tail = 0.0
    term = lt**n / math.factorial(n) if lt > 0 else (1.0 if n == 0 else 0.0)
    for e in range(n, full + 1):
        tail += term
        term *= lt / (e + 1)

    consts = DerivedConstants.from_params(params)
    coeff = params.v**n * math.sqrt(n + 1) ** (n + 1) / math.sqrt(n) ** n
    result = consts.prefactor * math.exp(-lt) * coeff * tail

    target = ac_mass(params, t)
    if abs(result - target) > 1e-12 * max(1.0, abs(target)):
        raise AssertionError(
            f"normalization chain mismatch: series {result!r} vs mass {target!r}"
        )
    return result


def remark_constant_check(params: EvolutionParams, t: float) -> tuple[float, float]:
    """The density prefactor two ways: closed form and t^n / (n! Vol T_vt).

    Both are (sqrt n)^n / ((sqrt(n+1))^(n+1) v^n); the pair is returned for
    the caller to compare.
    """
    if not t > 0:
        raise ValueError(f"time t must be > 0, got {t}")
    n = params.n
    closed = math.sqrt(n) ** n / (math.sqrt(n + 1) ** (n + 1) * params.v**n)
    via_volume = t**n / (math.factorial(n) * volume(params, t))
    return closed, via_volume
