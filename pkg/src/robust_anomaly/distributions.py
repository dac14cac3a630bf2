"""Chi-square and gaussian helpers used for cutoffs and consistency factors.

The chi-square quantile is found by bisection on the regularized lower
incomplete gamma function, evaluated with the usual series / continued
fraction split.
"""

import math
from statistics import NormalDist

_STD_NORMAL = NormalDist()

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 10_000


def _gamma_series(a, x):
    # P(a, x) by its power series, converges fast for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_fraction(a, x):
    # Q(a, x) by modified Lentz continued fraction, for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
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


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cont_fraction(a, x))


def chi2_cdf(x, df):
    """P(chi2_df <= x)."""
    return gammainc_lower(df / 2.0, x / 2.0)


def chi2_ppf(p, df):
    """Quantile of the chi-square distribution with ``df`` degrees of freedom.

    Bisection to relative precision ~1e-14; ``p == 1`` returns ``inf``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if df <= 0:
        raise ValueError("df must be positive")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return math.inf
    lo, hi = 0.0, max(1.0, float(df))
    while chi2_cdf(hi, df) < p:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def chi2_cutoff(df, level=0.975):
    """sqrt of the chi-square quantile: the usual cutoff for (robust) distances."""
    return math.sqrt(chi2_ppf(level, df))


def norm_cdf(x):
    return _STD_NORMAL.cdf(x)


def norm_pdf(x):
    return _STD_NORMAL.pdf(x)


def norm_ppf(p):
    if p >= 1.0:
        return math.inf
    if p <= 0.0:
        return -math.inf
    return _STD_NORMAL.inv_cdf(p)


def mcd_consistency_factor(h, n, d):
    """Factor making the raw h-subset covariance consistent at the gaussian.

    ``(h/n) / P(chi2_{d+2} <= chi2_{d, h/n})``; equals 1 when ``h == n``.
    """
    alpha = h / n
    if alpha >= 1.0:
        return 1.0
    q = chi2_ppf(alpha, d)
    return alpha / chi2_cdf(q, d + 2)


def lts_consistency_factor(h, n):
    """Asymptotic gaussian trimming factor c_{h,n} for the LTS scale.

    ``1 / sqrt(1 - (2n/h) q phi(q))`` with ``q = Phi^-1((h+n)/(2n))``.
    """
    if h >= n:
        return 1.0
    q = norm_ppf((h + n) / (2.0 * n))
    return 1.0 / math.sqrt(1.0 - (2.0 * n / h) * q * norm_pdf(q))
