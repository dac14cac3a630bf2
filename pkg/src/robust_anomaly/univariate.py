"""Univariate robust location and scale, and outlier-scoring rules.

All functions accept any 1-D array-like of finite reals.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateScaleError, InputError, NonConvergenceWarning
from .validation import check_matrix, check_sample

MAD_CONSTANT = 1.4826
QN_CONSTANT = 2.2219
IQR_CONSTANT = 0.7413
DEFAULT_CUTOFF = 2.5

HUBER_C = 1.345
BISQUARE_C = 4.685


@dataclass(frozen=True)
class PsiSpec:
    """A psi function for M-estimation of location."""

    family: str = "huber"
    c: float = HUBER_C

    def __post_init__(self):
        if self.family not in ("huber", "bisquare"):
            raise InputError(f"unknown psi family {self.family!r}")
        if not self.c > 0:
            raise InputError("psi tuning constant c must be positive")

    @classmethod
    def huber(cls, c=HUBER_C):
        return cls("huber", c)

    @classmethod
    def bisquare(cls, c=BISQUARE_C):
        return cls("bisquare", c)

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        c = self.c
        if self.family == "huber":
            return np.clip(u, -c, c)
        return np.where(np.abs(u) <= c, u * (1.0 - (u / c) ** 2) ** 2, 0.0)

    def weight(self, u):
        """psi(u)/u with the limit value 1 at u == 0."""
        u = np.asarray(u, dtype=float)
        c = self.c
        au = np.abs(u)
        if self.family == "huber":
            return np.where(au <= c, 1.0, c / np.maximum(au, c))
        return np.where(au <= c, (1.0 - (u / c) ** 2) ** 2, 0.0)

    def rho(self, u):
        u = np.asarray(u, dtype=float)
        c = self.c
        au = np.abs(u)
        if self.family == "huber":
            return np.where(au <= c, 0.5 * u**2, c * au - 0.5 * c**2)
        inner = 1.0 - (1.0 - (u / c) ** 2) ** 3
        return np.where(au <= c, c**2 / 6.0 * inner, c**2 / 6.0)


@dataclass
class UnivariateReport:
    """Location, scale, per-point scores and flags of a scoring rule."""

    location: float
    scale: float
    scores: np.ndarray
    cutoff: float
    flagged: np.ndarray = field(init=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.flagged = np.abs(self.scores) > self.cutoff


def median(x):
    """Middle order statistic; midpoint of the two middle ones for even n."""
    s = np.sort(check_sample(x))
    n = s.size
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return float((s[mid - 1] + s[mid]) / 2.0)


def mad(x):
    """Median absolute deviation from the median, scaled by 1.4826."""
    arr = check_sample(x)
    med = median(arr)
    return MAD_CONSTANT * median(np.abs(arr - med))


def _kth_pairwise_brute(s, k):
    i, j = np.triu_indices(s.size, 1)
    diffs = s[j] - s[i]
    return float(np.partition(diffs, k - 1)[k - 1])


def _count_below(s, pivot, strict):
    """Per-row index of the first j > i with s[j] - s[i] (>= if strict else >) pivot."""
    n = s.size
    idx = np.arange(n)
    side = "left" if strict else "right"
    pos = np.searchsorted(s, s + pivot, side=side)
    pos = np.clip(pos, idx + 1, n)
    # searchsorted compares s[j] with s[i] + pivot; the contract is on s[j] - s[i]
    cmp = (lambda v: v < pivot) if strict else (lambda v: v <= pivot)
    while True:
        can_up = pos < n
        up = np.zeros(n, bool)
        up[can_up] = cmp(s[pos[can_up]] - s[idx[can_up]])
        if not up.any():
            break
        pos[up] += 1
    while True:
        can_down = pos > idx + 1
        down = np.zeros(n, bool)
        down[can_down] = ~cmp(s[pos[can_down] - 1] - s[idx[can_down]])
        if not down.any():
            break
        pos[down] -= 1
    return pos


def kth_pairwise_difference(x, k):
    """k-th smallest (1-based) of {|x_i - x_j| : i < j}.

    Selection in the implicitly sorted matrix of differences using
    weighted-median pivots, so memory stays O(n) and time O(n log^2 n).
    """
    s = np.sort(check_sample(x, min_n=2))
    n = s.size
    total = n * (n - 1) // 2
    if not 1 <= k <= total:
        raise InputError(f"k={k} out of range [1, {total}]")
    if n <= 64:
        return _kth_pairwise_brute(s, k)
    rows = np.arange(n)
    left = rows + 1  # first live column per row
    right = np.full(n, n - 1)  # last live column per row
    while True:
        counts = np.maximum(right - left + 1, 0)
        live = int(counts.sum())
        if live <= 4 * n:
            offset = int((left - rows - 1).sum())
            r = np.repeat(rows, counts)
            starts = np.repeat(left - np.cumsum(counts) + counts, counts)
            cols = starts + np.arange(live)
            cand = s[cols] - s[r]
            return float(np.partition(cand, k - offset - 1)[k - offset - 1])
        active = counts > 0
        mids = (left[active] + right[active]) // 2
        vals = s[mids] - s[rows[active]]
        w = counts[active]
        order = np.argsort(vals, kind="stable")
        cw = np.cumsum(w[order])
        pivot = vals[order][np.searchsorted(cw, cw[-1] / 2.0)]
        lt_pos = _count_below(s, pivot, strict=True)
        le_pos = _count_below(s, pivot, strict=False)
        n_lt = int((lt_pos - rows - 1).sum())
        n_le = int((le_pos - rows - 1).sum())
        if n_lt < k <= n_le:
            return float(pivot)
        if k <= n_lt:
            right = np.minimum(right, lt_pos - 1)
        else:
            left = np.maximum(left, le_pos)


def qn(x):
    """Qn scale: 2.2219 times the C(h,2)-th smallest pairwise distance, h = n//2 + 1."""
    arr = check_sample(x, min_n=2)
    h = arr.size // 2 + 1
    k = h * (h - 1) // 2
    return QN_CONSTANT * kth_pairwise_difference(arr, k)


def quartiles(x):
    """(Q1, Q3) as the order statistics x_(floor(n/4)) and x_(ceil(3n/4)), 1-based."""
    s = np.sort(check_sample(x, min_n=4))
    n = s.size
    i1 = min(max(n // 4, 1), n)
    i3 = min(max(math.ceil(3 * n / 4), 1), n)
    return float(s[i1 - 1]), float(s[i3 - 1])


def iqr_normalized(x):
    """0.7413 * (Q3 - Q1)."""
    q1, q3 = quartiles(x)
    return IQR_CONSTANT * (q3 - q1)


def boxplot_fences(x):
    """Tukey fence [Q1 - 1.5 IQR, Q3 + 1.5 IQR] with the raw (unnormalized) IQR."""
    q1, q3 = quartiles(x)
    spread = q3 - q1
    return q1 - 1.5 * spread, q3 + 1.5 * spread


def _tied_values(arr):
    values, counts = np.unique(arr, return_counts=True)
    return tuple(float(v) for v in values[counts == counts.max()])


def m_location(x, psi=None, tol=1e-8, max_iter=100, scale=None):
    """M-estimate of location solving sum psi((x - mu)/sigma) = 0.

    Iteratively reweighted means with weights psi(u)/u, started at the median.
    ``scale`` defaults to Qn. Warns with NonConvergenceWarning and returns the
    last iterate if ``max_iter`` is reached.
    """
    arr = check_sample(x, min_n=2)
    psi = PsiSpec.huber() if psi is None else psi
    sigma = qn(arr) if scale is None else float(scale)
    if not sigma > 0:
        raise DegenerateScaleError(
            "scale estimate is zero; M-location undefined", _tied_values(arr)
        )
    mu = median(arr)
    for _ in range(max_iter):
        w = psi.weight((arr - mu) / sigma)
        wsum = w.sum()
        if wsum <= 0:
            raise DegenerateScaleError("all psi weights vanished", _tied_values(arr))
        new = float(np.dot(w, arr) / wsum)
        if abs(new - mu) <= tol * max(1.0, sigma):
            return new
        mu = new
    warnings.warn(
        f"M-location did not converge in {max_iter} iterations", NonConvergenceWarning
    )
    return mu


def z_scores(x, cutoff=DEFAULT_CUTOFF):
    """Classical rule: (x - mean) / stdev with the n-1 divisor."""
    arr = check_sample(x, min_n=2)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0:
        raise DegenerateScaleError("standard deviation is zero", _tied_values(arr))
    return UnivariateReport(mean, sd, (arr - mean) / sd, cutoff)


def robust_scores(x, cutoff=DEFAULT_CUTOFF, scale="mad"):
    """Robust rule: (x - median) / MAD (or Qn with ``scale='qn'``)."""
    arr = check_sample(x)
    med = median(arr)
    if scale == "mad":
        s = mad(arr)
    elif scale == "qn":
        s = qn(arr)
    else:
        raise InputError(f"unknown scale estimator {scale!r}")
    if s == 0:
        ties = _tied_values(arr)
        raise DegenerateScaleError(
            f"robust scale is zero: at least half the values equal {ties}", ties
        )
    return UnivariateReport(med, s, (arr - med) / s, cutoff)


class RobustStandardizer(TransformerMixin, BaseEstimator):
    """Column-wise robust standardization (x - median) / scale.

    Columns whose scale is zero are recorded in ``degenerate_`` and left
    centered but unscaled.
    """

    def __init__(self, scale="mad"):
        self.scale = scale

    def fit(self, X, y=None):
        X = check_matrix(X, allow_nan=True)
        est = {"mad": mad, "qn": qn}.get(self.scale)
        if est is None:
            raise InputError(f"unknown scale estimator {self.scale!r}")
        n_cols = X.shape[1]
        self.location_ = np.zeros(n_cols)
        self.scale_ = np.zeros(n_cols)
        for j in range(n_cols):
            col = X[:, j]
            col = col[np.isfinite(col)]
            if col.size == 0:
                continue
            self.location_[j] = median(col)
            self.scale_[j] = est(col) if col.size >= 2 else 0.0
        self.degenerate_ = self.scale_ == 0
        self.n_features_in_ = n_cols
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_matrix(X, allow_nan=True)
        safe = np.where(self.degenerate_, 1.0, self.scale_)
        Z = (X - self.location_) / safe
        Z[:, self.degenerate_] = 0.0 * Z[:, self.degenerate_]
        return Z
