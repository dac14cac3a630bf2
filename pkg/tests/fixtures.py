"""Data builders and brute-force oracles shared by the test modules.

The oracles are written directly from the defining formulas and do not call
into the package, so agreement with the package is a two-route check.
"""

import itertools
import math

import numpy as np

# five measurements of one quantity; the second set has a misplaced decimal point
CLEAN = np.array([6.27, 6.34, 6.25, 6.31, 6.28])
CONTAMINATED = np.array([6.27, 6.34, 6.25, 63.1, 6.28])


# -- oracles -----------------------------------------------------------------


def qn_oracle(x):
    x = list(map(float, x))
    n = len(x)
    gaps = sorted(abs(x[i] - x[j]) for i in range(n) for j in range(i + 1, n))
    h = n // 2 + 1
    return 2.2219 * gaps[h * (h - 1) // 2 - 1]


def mahalanobis_oracle(X, mu, sigma):
    inv = np.linalg.inv(sigma)
    return np.array([math.sqrt(max(0.0, (x - mu) @ inv @ (x - mu))) for x in X])


def mcd_oracle(X, h):
    """(min det, subset) over all h-subsets, via np.cov."""
    best = (math.inf, None)
    for sub in itertools.combinations(range(len(X)), h):
        C = np.atleast_2d(np.cov(X[list(sub)], rowvar=False))
        det = float(np.linalg.det(C))
        if det < best[0]:
            best = (det, sub)
    return best


def lts_oracle(X, y, h):
    """(min RSS, subset) over all h-subsets, LS with intercept via lstsq."""
    A = np.column_stack([np.ones(len(y)), X])
    best = (math.inf, None)
    for sub in itertools.combinations(range(len(y)), h):
        idx = list(sub)
        beta = np.linalg.lstsq(A[idx], y[idx], rcond=None)[0]
        rss = float(((y[idx] - A[idx] @ beta) ** 2).sum())
        if rss < best[0]:
            best = (rss, sub)
    return best


def mrcd_oracle(X, h, rho):
    """min over h-subsets of det(rho I + (1 - rho) S_H) on (median, Qn) standardized data."""
    X = np.asarray(X, float)
    Z = (X - np.median(X, axis=0)) / np.array([qn_oracle(c) for c in X.T])
    d = X.shape[1]
    best = math.inf
    for sub in itertools.combinations(range(len(X)), h):
        S = np.cov(Z[list(sub)], rowvar=False).reshape(d, d)
        best = min(best, float(np.linalg.det(rho * np.eye(d) + (1 - rho) * S)))
    return best


def trimmed_kmeans_oracle(X, k, h):
    """Exhaustive over h-subsets and, for k = 2, over 2-splits sorted by projections.

    Only used for tiny sizes: tries every h-subset with every assignment
    induced by Lloyd iterations started from each pair of its points.
    """
    best = math.inf
    n = len(X)
    for sub in itertools.combinations(range(n), h):
        Y = X[list(sub)]
        for pair in itertools.combinations(range(h), k):
            C = Y[list(pair)].copy()
            for _ in range(50):
                lab = np.argmin(((Y[:, None] - C[None]) ** 2).sum(2), axis=1)
                if len(set(lab)) < k:
                    break
                newC = np.array([Y[lab == j].mean(0) for j in range(k)])
                if np.allclose(newC, C):
                    break
                C = newC
            best = min(best, float(((Y - C[lab]) ** 2).sum()))
    return best


# -- geometric fixtures --------------------------------------------------------


def masking_fixture(seed=5):
    """25 points on a correlated gaussian line plus 3 points off the trend.

    The three planted points sit inside the classical tolerance ellipse but
    far outside the robust one. Returns (X, outlier_index).
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 2, 25)
    y = 0.75 * x + rng.normal(0, 0.4, 25)
    out = np.array([[4.0, 0.5], [4.3, 0.72], [4.6, 0.95]])
    return np.vstack([np.c_[x, y], out]), np.arange(25, 28)


def leverage_fixture(seed=3):
    """43 points along y = 2 + 0.5 x plus 4 bad leverage points at (x - 4, y + 1.5).

    Returns (X (47, 1), y, giant_index).
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(4, 5, 43)
    y = 2 + 0.5 * x + rng.normal(0, 0.1, 43)
    xg = x.mean() - 4 + rng.normal(0, 0.05, 4)
    yg = y.mean() + 1.5 + rng.normal(0, 0.05, 4)
    return np.r_[x, xg][:, None], np.r_[y, yg], np.arange(43, 47)


PLANE = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).T
PCA_SPECIAL_CLASSES = ["good_leverage", "good_leverage", "orthogonal", "bad_leverage",
                       "bad_leverage"]


def plane_fixture(seed=7):
    """50 points near the (x1, x2) plane in 3-D plus one point of each outlier type.

    Returns (X, special_index); the expected classes of the five special rows
    are PCA_SPECIAL_CLASSES.
    """
    rng = np.random.default_rng(seed)
    P = rng.normal(0, [4, 2], size=(50, 2))
    z = rng.normal(0, 0.2, 50)
    special = np.array([[16, 0, 0.0], [-12, 5, 0.0], [1, 0.5, 6], [14, 4, 25], [12, 6, 25]])
    return np.vstack([np.c_[P, z], special]), np.arange(50, 55)


def two_clusters_fixture(seed=0):
    """Two tight clusters of 10 and two distant noise points (rows 20, 21)."""
    rng = np.random.default_rng(seed)
    A = rng.normal(0, 0.1, (10, 2))
    B = rng.normal(0, 0.1, (10, 2)) + [5, 5]
    return np.vstack([A, B, [[20, -10], [-15, 12]]]), np.array([20, 21])


def random_fixtures(count, seed, n_range=(8, 13), d_range=(1, 4)):
    """Heavy-tailed random matrices for oracle comparisons: yields (X, h)."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(*n_range))
        d = int(rng.integers(*d_range))
        h = int(rng.integers(d + 2, n))
        yield rng.standard_t(3, size=(n, d)), h
