"""Least trimmed squares regression and the regression outlier map."""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .covariance import _map_starts, fast_mcd, mahalanobis_distances
from .distributions import chi2_cutoff, lts_consistency_factor, norm_cdf, norm_pdf
from .exceptions import ExactFitError, InputError
from .validation import check_h, check_matrix, check_sample

MAX_CSTEPS = 100
N_BEST = 10
RESID_CUTOFF = 2.5
_ZERO_RTOL = 1e-10

REGULAR = "regular"
VERTICAL = "vertical"
GOOD_LEVERAGE = "good_leverage"
BAD_LEVERAGE = "bad_leverage"


@dataclass
class RegressionFit:
    """Coefficients (intercept first when fitted), residuals and scale."""

    beta: np.ndarray
    residuals: np.ndarray
    h: int
    sigma: float
    chn: float
    weights: np.ndarray
    best_subset: np.ndarray
    objective: float
    intercept: bool = True
    exact_fit: bool = False
    reweighted: bool = False
    inference: dict = field(default_factory=dict)

    @property
    def std_residuals(self):
        if self.sigma == 0:
            raise ExactFitError("scale is zero (exact fit); residuals cannot be standardized")
        return self.residuals / self.sigma


@dataclass
class RegressionOutlierMap:
    std_resid: np.ndarray
    rd_x: np.ndarray
    resid_cutoff: float
    rd_cutoff: float
    classes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.classes = classify_points(
            np.abs(self.std_resid) > self.resid_cutoff, self.rd_x > self.rd_cutoff,
            labels=(REGULAR, VERTICAL, GOOD_LEVERAGE, BAD_LEVERAGE),
        )


def classify_points(big_resid, big_dist, labels):
    """Four-way classification from two threshold tests.

    ``labels`` = (neither, residual only, distance only, both).
    """
    out = np.full(big_resid.shape, labels[0], dtype=object)
    out[big_resid & ~big_dist] = labels[1]
    out[~big_resid & big_dist] = labels[2]
    out[big_resid & big_dist] = labels[3]
    return out


def design_matrix(X, intercept=True):
    X = check_matrix(X)
    if intercept:
        return np.hstack([np.ones((X.shape[0], 1)), X])
    return X


def _check_xy(X, y, intercept):
    A = design_matrix(X, intercept)
    y = check_sample(y, name="y")
    if y.size != A.shape[0]:
        raise InputError(f"X has {A.shape[0]} rows but y has {y.size} values")
    return A, y


def _ls(A, y):
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return beta


def _trimmed_sum(r2, h):
    return float(np.partition(r2, h - 1)[:h].sum())


def _smallest(r2, h):
    return np.sort(np.argsort(r2, kind="stable")[:h])


def ls_fit(X, y, intercept=True):
    """Ordinary least squares; returns the coefficient vector."""
    A, y = _check_xy(X, y, intercept)
    return _ls(A, y)


def lts_c_step(A, y, beta, h):
    """Refit LS on the h cases with the smallest squared residuals of ``beta``.

    Returns (new_beta, subset).
    """
    r2 = (y - A @ beta) ** 2
    subset = _smallest(r2, h)
    return _ls(A[subset], y[subset]), subset


def lts_objective(A, y, beta, h):
    """Sum of the h smallest squared residuals."""
    return _trimmed_sum((y - A @ beta) ** 2, h)


def _elemental_fit(A, y, rng, tries=100):
    n, p = A.shape
    for _ in range(tries):
        idx = rng.choice(n, p, replace=False)
        if np.linalg.matrix_rank(A[idx]) == p:
            return np.linalg.solve(A[idx], y[idx])
    perm = rng.permutation(n)
    return _ls(A[perm], y[perm])


def _converge(A, y, beta, h, max_steps):
    obj = lts_objective(A, y, beta, h)
    subset = _smallest((y - A @ beta) ** 2, h)
    for _ in range(max_steps):
        new_beta, new_subset = lts_c_step(A, y, beta, h)
        new_obj = lts_objective(A, y, new_beta, h)
        if new_obj >= obj:
            break
        changed = not np.array_equal(new_subset, subset)
        beta, obj, subset = new_beta, new_obj, new_subset
        if not changed:
            break
    return beta, obj


def _is_exact(resid, y, h):
    tol = _ZERO_RTOL * max(1.0, float(np.abs(y).max()))
    return int(np.sum(np.abs(resid) <= tol)) >= h


def _package(A, y, beta, h, intercept, obj=None):
    n = A.shape[0]
    resid = y - A @ beta
    r2 = resid**2
    subset = _smallest(r2, h)
    exact = _is_exact(resid, y, h)
    chn = lts_consistency_factor(h, n)
    sigma = 0.0 if exact else chn * math.sqrt(_trimmed_sum(r2, h) / h)
    if exact:
        weights = (np.abs(resid) <= _ZERO_RTOL * max(1.0, float(np.abs(y).max()))).astype(float)
    else:
        weights = (np.abs(resid / sigma) <= RESID_CUTOFF).astype(float)
    return RegressionFit(
        beta=beta,
        residuals=resid,
        h=h,
        sigma=sigma,
        chn=chn,
        weights=weights,
        best_subset=subset,
        objective=_trimmed_sum(r2, h) if obj is None else obj,
        intercept=intercept,
        exact_fit=exact,
    )


def default_lts_h(n, p):
    """(n + p + 1) // 2 for p coefficients; with an intercept p = d + 1."""
    return (n + p + 1) // 2


def fast_lts(X, y, h=None, n_starts=500, seed=0, intercept=True):
    """Least trimmed squares by FAST-LTS.

    Elemental p-point fits (p coefficients) each get two C-steps, the ten best
    are iterated to convergence. The returned beta is the LS fit on
    ``best_subset``; an exact fit (h or more zero residuals) is flagged and
    gets sigma = 0.
    """
    A, y = _check_xy(X, y, intercept)
    n, p = A.shape
    if n <= p:
        raise InputError(f"need more cases than coefficients (n={n}, p={p})")
    if np.linalg.matrix_rank(A) < p:
        raise InputError("design matrix is rank deficient")
    h = default_lts_h(n, p) if h is None else check_h(h, n, p + 1)
    if h == n:
        return _package(A, y, _ls(A, y), h, intercept)

    streams = np.random.SeedSequence(seed).spawn(n_starts)

    def start(ss):
        beta = _elemental_fit(A, y, np.random.default_rng(ss))
        return _converge(A, y, beta, h, 2)

    trials = _map_starts(start, streams)
    order = sorted(range(len(trials)), key=lambda i: (trials[i][1], i))
    finals = [_converge(A, y, trials[i][0], h, MAX_CSTEPS) for i in order[:N_BEST]]
    beta, obj = min(finals, key=lambda t: t[1])
    # make beta exactly the LS fit of its own h-subset
    subset = _smallest((y - A @ beta) ** 2, h)
    refit = _ls(A[subset], y[subset])
    if lts_objective(A, y, refit, h) <= obj:
        beta = refit
    return _package(A, y, beta, h, intercept)


def exhaustive_lts(X, y, h, intercept=True, budget=1_000_000, batch=20_000):
    """Global LTS optimum: LS on every h-subset, keep the smallest RSS (test oracle)."""
    A, y = _check_xy(X, y, intercept)
    n, p = A.shape
    h = check_h(h, n, p)
    total = math.comb(n, h)
    if total > budget:
        raise InputError(f"C({n},{h}) = {total} subsets exceeds the budget {budget}")
    best, best_subset = math.inf, None
    combos = itertools.combinations(range(n), h)
    while True:
        chunk = np.array(list(itertools.islice(combos, batch)), dtype=int)
        if chunk.size == 0:
            break
        Ab, yb = A[chunk], y[chunk]
        beta = np.einsum("bij,bj->bi", np.linalg.pinv(Ab), yb)
        rss = ((yb - np.einsum("bij,bj->bi", Ab, beta)) ** 2).sum(axis=1)
        i = int(np.argmin(rss))
        if rss[i] < best:
            best, best_subset = float(rss[i]), chunk[i]
    beta = _ls(A[best_subset], y[best_subset])
    return _package(A, y, beta, h, intercept, obj=best)


def lts_scale(fit_or_residuals, h=None):
    """c_{h,n} * sqrt(mean of the h smallest squared residuals)."""
    if isinstance(fit_or_residuals, RegressionFit):
        resid, h = fit_or_residuals.residuals, fit_or_residuals.h if h is None else h
    else:
        resid = check_sample(fit_or_residuals, name="residuals")
        h = resid.size if h is None else h
    n = resid.size
    h = check_h(h, n, 1)
    return lts_consistency_factor(h, n) * math.sqrt(_trimmed_sum(resid**2, h) / h)


def _inference(A, y, beta, w, intercept):
    keep = w > 0
    Ak, yk = A[keep], y[keep]
    m, p = Ak.shape
    resid = yk - Ak @ beta
    dof = m - p
    rss = float(resid @ resid)
    s2 = rss / dof
    cov = s2 * np.linalg.pinv(Ak.T @ Ak)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(t), dof)
    if intercept:
        tss = float(((yk - yk.mean()) ** 2).sum())
        df_model = p - 1
    else:
        tss = float((yk**2).sum())
        df_model = p
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    if df_model > 0 and rss > 0:
        f = ((tss - rss) / df_model) / s2
        f_p = float(stats.f.sf(f, df_model, dof))
    else:
        f, f_p = float("nan"), float("nan")
    return {
        "se": se, "t": t, "p_values": pvals, "r2": r2, "f": float(f),
        "f_p_value": f_p, "dof": dof, "sigma": math.sqrt(s2),
    }


def truncated_normal_sd(c):
    """Standard deviation of a standard normal truncated to [-c, c]."""
    return math.sqrt(1.0 - 2.0 * c * norm_pdf(c) / (2.0 * norm_cdf(c) - 1.0))


def reweighted_ls(fit, X, y, cutoff=RESID_CUTOFF):
    """Weighted LS with weights 1{|r_i / sigma_LTS| <= cutoff}.

    Returns a new RegressionFit whose ``inference`` carries t, F and R^2
    output. Its ``sigma`` is the residual standard error of the kept cases
    divided by ``truncated_normal_sd(cutoff)``, which makes it consistent at
    gaussian errors despite the truncation; ``inference["sigma"]`` is the
    uncorrected residual standard error used for the t statistics.
    """
    if fit.sigma <= 0:
        raise ExactFitError("LTS scale is zero (exact fit); cannot reweight")
    A, y = _check_xy(X, y, fit.intercept)
    n, p = A.shape
    w = (np.abs(fit.residuals / fit.sigma) <= cutoff).astype(float)
    if w.sum() < p + 1:
        raise InputError(f"only {int(w.sum())} cases kept; need at least {p + 1}")
    keep = w > 0
    beta = _ls(A[keep], y[keep])
    info = _inference(A, y, beta, w, fit.intercept)
    resid = y - A @ beta
    return RegressionFit(
        beta=beta,
        residuals=resid,
        h=fit.h,
        sigma=info["sigma"] / truncated_normal_sd(cutoff),
        chn=fit.chn,
        weights=w,
        best_subset=fit.best_subset,
        objective=float((w * resid**2).sum()),
        intercept=fit.intercept,
        reweighted=True,
        inference=info,
    )


def regression_outlier_map(fit, X, x_scatter=None, seed=0, level=0.975,
                           resid_cutoff=RESID_CUTOFF):
    """Standardized residuals of ``fit`` against robust distances of the predictors.

    ``x_scatter`` defaults to the reweighted FastMCD of X.
    """
    X = check_matrix(X)
    if x_scatter is None:
        x_scatter = fast_mcd(X, seed=seed, reweight=True, level=level)
    rd = mahalanobis_distances(X, x_scatter)
    return RegressionOutlierMap(
        fit.std_residuals, rd, resid_cutoff, chi2_cutoff(X.shape[1], level)
    )


class LTSRegression(RegressorMixin, BaseEstimator):
    """Least trimmed squares regression with optional reweighting.

    Fitted attributes: ``raw_`` (the LTS fit), ``fit_`` (the reweighted fit
    when ``reweight`` else the raw one), ``coef_``, ``intercept_``,
    ``scale_`` and ``weights_``.
    """

    def __init__(self, h=None, n_starts=500, random_state=0, fit_intercept=True,
                 reweight=True, cutoff=RESID_CUTOFF):
        self.h = h
        self.n_starts = n_starts
        self.random_state = random_state
        self.fit_intercept = fit_intercept
        self.reweight = reweight
        self.cutoff = cutoff

    def fit(self, X, y):
        X = check_matrix(X)
        self.raw_ = fast_lts(X, y, self.h, self.n_starts, self.random_state, self.fit_intercept)
        if self.reweight and not self.raw_.exact_fit:
            self.fit_ = reweighted_ls(self.raw_, X, y, self.cutoff)
        else:
            self.fit_ = self.raw_
        beta = self.fit_.beta
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[1:] if self.fit_intercept else beta
        self.scale_ = self.fit_.sigma
        self.raw_scale_ = self.raw_.sigma
        self.weights_ = self.fit_.weights
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return check_matrix(X) @ self.coef_ + self.intercept_

    def outlier_map(self, X, x_scatter=None):
        """Outlier map built from the raw LTS residuals and scale."""
        check_is_fitted(self, "raw_")
        return regression_outlier_map(self.raw_, X, x_scatter, seed=self.random_state,
                                      resid_cutoff=self.cutoff)
