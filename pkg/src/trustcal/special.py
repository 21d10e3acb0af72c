"""Chi-square and Kolmogorov distribution functions and quantiles.

Only what the asymptotic baseline needs. The test suite checks these
against scipy as an independent implementation.
"""

from __future__ import annotations

import math

__all__ = [
    "regularized_lower_gamma",
    "chi2_cdf",
    "chi2_ppf",
    "kolmogorov_cdf",
    "kolmogorov_ppf",
    "bisect",
]

_EPS = 1e-16
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by the modified Lentz method."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x); series below ``x < a + 1``, continued fraction above."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_continued_fraction(a, x)


def chi2_cdf(x: float, df: float) -> float:
    return regularized_lower_gamma(df / 2.0, x / 2.0)


def bisect(f, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 500) -> float:
    """Root of an increasing function ``f`` on ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ValueError("root is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")


def chi2_ppf(p: float, df: float) -> float:
    _check_p(p)
    hi = max(1.0, df)
    while chi2_cdf(hi, df) < p:
        hi *= 2.0
    return bisect(lambda t: chi2_cdf(t, df) - p, 0.0, hi)


def kolmogorov_cdf(x: float) -> float:
    """Limiting distribution of sqrt(n) D_n:
    K(x) = 1 - 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)."""
    if x <= 0:
        return 0.0
    if x < 0.3:
        # Jacobi-theta form, converges fast for small x
        s = 0.0
        c = math.pi ** 2 / (8.0 * x * x)
        for k in range(1, 200, 2):
            term = math.exp(-k * k * c)
            s += term
            if term < 1e-16:
                break
        return math.sqrt(2.0 * math.pi) / x * s
    total = 0.0
    for k in range(1, 1000):
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 == 1 else -term
        if term < 1e-12:
            break
    return 1.0 - 2.0 * total


def kolmogorov_ppf(p: float) -> float:
    _check_p(p)
    return bisect(lambda t: kolmogorov_cdf(t) - p, 1e-3, 10.0)
