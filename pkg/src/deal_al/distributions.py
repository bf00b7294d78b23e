"""Beta/Gamma primitives used by the second-order posterior machinery.

All functions accept scalars or numpy arrays (broadcast together) and return
the same shape. Scalars in, Python floats out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln


class DomainError(ValueError):
    """Raised when an argument lies outside a function's mathematical domain."""


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta(alpha, beta) distribution.

    ``alpha`` and ``beta`` may be arrays of equal shape, in which case the
    object describes one Beta distribution per element.
    """

    alpha: float | np.ndarray
    beta: float | np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("Beta shape parameters must be finite")
        if np.any(a <= 0) or np.any(b <= 0):
            raise DomainError("Beta shape parameters must be positive")


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("Gamma shape and scale must be positive")


@dataclass(frozen=True)
class DiscreteSecondOrder:
    """Finitely supported distribution over the posterior value q.

    Atoms are ``(q, mass)`` pairs. Only used to exercise the degenerate
    cases no Beta distribution can reach (point masses at 0, 1 or 1/2).
    """

    atoms: tuple[tuple[float, float], ...]

    def __init__(self, atoms: Sequence[tuple[float, float]]):
        atoms = tuple((float(q), float(m)) for q, m in atoms)
        if not atoms:
            raise DomainError("at least one atom is required")
        for q, m in atoms:
            if not 0.0 <= q <= 1.0:
                raise DomainError(f"atom location {q} outside [0, 1]")
            if m < 0:
                raise DomainError(f"negative atom mass {m}")
        if abs(sum(m for _, m in atoms) - 1.0) > 1e-12:
            raise DomainError("atom masses must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    def mean(self) -> float:
        return sum(q * m for q, m in self.atoms)


_FPMIN = 1e-300
_EPS = 4 * np.finfo(float).eps
_MAXIT = 10_000


_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
# Stirling series coefficients for the Binet remainder, 1/12z - 1/360z^3 + ...
_BINET = (1.0 / 12, -1.0 / 360, 1.0 / 1260, -1.0 / 1680, 1.0 / 1188)


def _binet(z):
    """log Gamma(z) minus its Stirling approximation (z - 1/2) log z - z + log sqrt(2 pi)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z >= 10.0
    zb = z[big]
    inv2 = 1.0 / (zb * zb)
    acc = np.zeros_like(zb)
    for c in reversed(_BINET):
        acc = acc * inv2 + c
    out[big] = acc / zb
    zs = z[~big]
    out[~big] = gammaln(zs) - ((zs - 0.5) * np.log(zs) - zs + _LOG_SQRT_2PI)
    return out


def _log_ratio(num, den):
    # log(num / den), through log1p when the ratio is close to one
    r = num / den
    near = np.abs(r - 1.0) < 0.5
    return np.where(near, np.log1p((num - den) / den), np.log(r))


def _log_power_terms(x, a, b):
    """log of x^a (1 - x)^b / B(a, b), accurate for large shapes.

    Written relative to the mean x0 = a / (a + b) so that the large terms
    a log x + b log(1 - x) and log B(a, b) never cancel numerically.
    """
    s = a + b
    x0 = a / s
    y0 = b / s
    with np.errstate(divide="ignore"):
        t = a * _log_ratio(x, x0) + b * _log_ratio(1.0 - x, y0)
    return t + 0.5 * np.log(a * b / s) - _LOG_SQRT_2PI + _binet(s) - _binet(a) - _binet(b)


def _betacf(a, b, x):
    # Modified Lentz evaluation of the incomplete-beta continued fraction,
    # vectorised; iterates until every element has converged.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h *= delta
        done |= np.abs(delta - 1.0) < _EPS
        if np.all(done):
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def reg_inc_beta(x, p: BetaParams):
    """Regularized incomplete beta function I_x(alpha, beta).

    This is the CDF of Beta(alpha, beta) evaluated at ``x``. The continued
    fraction is evaluated on whichever tail converges faster, switching at
    ``x = (alpha + 1) / (alpha + beta + 2)``.

    Raises
    ------
    DomainError
        If any ``x`` lies outside [0, 1].
    """
    scalar = np.ndim(x) == 0 and np.ndim(p.alpha) == 0 and np.ndim(p.beta) == 0
    x, a, b = np.broadcast_arrays(
        np.asarray(x, dtype=float),
        np.asarray(p.alpha, dtype=float),
        np.asarray(p.beta, dtype=float),
    )
    if np.any(np.isnan(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("x must lie in [0, 1]")

    out = np.empty(x.shape, dtype=float)
    lo = x == 0.0
    hi = x == 1.0
    out[lo] = 0.0
    out[hi] = 1.0
    mid = ~(lo | hi)
    if np.any(mid):
        xm, am, bm = x[mid], a[mid], b[mid]
        front = np.exp(_log_power_terms(xm, am, bm))
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        res = np.empty(xm.shape)
        if np.any(direct):
            res[direct] = (
                front[direct] * _betacf(am[direct], bm[direct], xm[direct]) / am[direct]
            )
        flip = ~direct
        if np.any(flip):
            res[flip] = 1.0 - front[flip] * _betacf(
                bm[flip], am[flip], 1.0 - xm[flip]
            ) / bm[flip]
        out[mid] = np.clip(res, 0.0, 1.0)
    return float(out) if scalar else out


def beta_mean(p: BetaParams):
    a = np.asarray(p.alpha, dtype=float)
    b = np.asarray(p.beta, dtype=float)
    m = a / (a + b)
    return float(m) if m.ndim == 0 else m


def expected_min(p: BetaParams):
    """E[min(Q, 1 - Q)] for Q ~ Beta(alpha, beta), in closed form.

    Splitting the integral at 1/2 and absorbing the extra factor of q (or
    1 - q) into the Beta density gives::

        (alpha * I_{1/2}(alpha + 1, beta)
         + beta * (1 - I_{1/2}(alpha, beta + 1))) / (alpha + beta)
    """
    a = np.asarray(p.alpha, dtype=float)
    b = np.asarray(p.beta, dtype=float)
    lower = reg_inc_beta(0.5, BetaParams(a + 1.0, b))
    upper = 1.0 - reg_inc_beta(0.5, BetaParams(a, b + 1.0))
    e = (a * lower + b * upper) / (a + b)
    # rounding can push results a hair outside [0, min(m, 1 - m)]; the bound is
    # computed exactly as the point risk is, so Jensen holds bit for bit
    m = a / (a + b)
    e = np.clip(e, 0.0, np.minimum(m, 1.0 - m))
    return float(e) if e.ndim == 0 else e


def discrete_expected_min(d: DiscreteSecondOrder) -> float:
    return float(sum(m * min(q, 1.0 - q) for q, m in d.atoms))


def sample_gamma(g: GammaParams, rng_seed, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. Gamma(shape, scale) variates, reproducibly.

    Only determinism given ``rng_seed`` is guaranteed, not the particular
    sampling algorithm (numpy's Marsaglia-Tsang rejection sampler).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng_seed)
    return rng.gamma(g.shape, g.scale, size=n)
