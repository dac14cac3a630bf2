"""Robust multivariate location and scatter.

FastMCD and its exhaustive counterpart, MRCD for d >= n, robust and
classical distances, Stahel-Donoho outlyingness, DD-plot data and
tolerance ellipses.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_is_fitted

from .distributions import chi2_cdf, chi2_cutoff, chi2_ppf, mcd_consistency_factor
from .exceptions import ExactFitError, InputError, SingularMatrixError
from .univariate import MAD_CONSTANT, qn
from .validation import check_h, check_matrix, n_threads

_SINGULAR_RTOL = 1e-12
_SV_RTOL = 1e-8  # on singular values of centered subset rows
N_BEST = 10
MAX_CSTEPS = 100


@dataclass
class LocationScatter:
    """A center and scatter matrix together with how they were obtained.

    ``objective`` is the determinant of the raw (unscaled) h-subset
    covariance; ``sigma`` includes the consistency factor and, when
    ``reweighted``, the reweighting step.
    """

    mu: np.ndarray
    sigma: np.ndarray
    h: int
    consistency_factor: float = 1.0
    reweighted: bool = False
    best_subset: np.ndarray = None
    objective: float = float("nan")
    exact_fit: bool = False
    hyperplane: tuple = None
    raw_mu: np.ndarray = None
    raw_sigma: np.ndarray = None
    weights: np.ndarray = None
    extra: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.mu.shape[0]


@dataclass
class DistanceReport:
    """Classical (md) and robust (rd) distances with the chi-square cutoff."""

    md: np.ndarray
    rd: np.ndarray
    cutoff: float
    flags: np.ndarray = field(init=False)
    md_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.flags = self.rd > self.cutoff
        self.md_flags = self.md > self.cutoff


@dataclass
class OutlyingnessReport:
    outl: np.ndarray
    directions_used: int
    directions_skipped: int = 0


# -- helpers -----------------------------------------------------------------


def _moments(X):
    mu = X.mean(axis=0)
    dev = X - mu
    S = dev.T @ dev / (X.shape[0] - 1)
    return mu, S


def _is_singular(S):
    eig = np.linalg.eigvalsh(S)
    top = max(abs(eig[-1]), np.finfo(float).tiny)
    return eig[0] <= _SINGULAR_RTOL * top


def _hyperplane(mu, S):
    eig, vec = np.linalg.eigh(S)
    normal = vec[:, 0]
    k = np.argmax(np.abs(normal))
    if normal[k] < 0:
        normal = -normal
    return normal, float(normal @ mu)


def _sq_distances(X, mu, S):
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("scatter matrix is not positive definite") from None
    z = solve_triangular(L, (X - mu).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def _subset_svd(Xs):
    # singular values of the centered rows keep precision that forming
    # the covariance (squaring) loses when offsets dwarf the spread
    mu = Xs.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xs - mu, full_matrices=False)
    return mu, s, Vt


def _svd_singular(s, d):
    return s.size < d or s[-1] <= _SV_RTOL * max(s[0], np.finfo(float).tiny)


def _svd_exact_fit(mu, Vt, subset, msg):
    normal = Vt[-1]
    if normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal
    return ExactFitError(msg, normal, float(normal @ mu), subset)


def _svd_sq_distances(X, mu, s, Vt, m):
    z = (X - mu) @ Vt.T / (s / math.sqrt(m - 1))
    return np.einsum("ij,ij->i", z, z)


def _smallest(dist, h):
    # stable so that ties resolve to the lower row index
    return np.sort(np.argsort(dist, kind="stable")[:h])


# -- classical ---------------------------------------------------------------


def classical_moments(X):
    """Empirical mean and covariance (n-1 divisor); flags a singular covariance."""
    X = check_matrix(X, min_rows=2)
    n = X.shape[0]
    mu, S = _moments(X)
    singular = _is_singular(S)
    return LocationScatter(
        mu=mu,
        sigma=S,
        h=n,
        best_subset=np.arange(n),
        objective=float(np.linalg.det(S)),
        exact_fit=singular,
        hyperplane=_hyperplane(mu, S) if singular else None,
        raw_mu=mu,
        raw_sigma=S,
    )


def mahalanobis_distances(X, ls):
    """sqrt((x - mu)^T Sigma^-1 (x - mu)) for every row of X."""
    X = check_matrix(X)
    if X.shape[1] != ls.mu.shape[0]:
        raise InputError(f"X has {X.shape[1]} columns, scatter is {ls.mu.shape[0]}-dim")
    if ls.exact_fit or _is_singular(ls.sigma):
        raise SingularMatrixError("scatter matrix is singular; distances undefined")
    return np.sqrt(_sq_distances(X, ls.mu, ls.sigma))


# -- MCD ---------------------------------------------------------------------


def c_step(X, subset):
    """One concentration step.

    Returns the h rows with the smallest Mahalanobis distances relative to
    the mean and covariance of ``subset`` (sorted indices). Raises
    ExactFitError if the subset covariance is singular.
    """
    X = check_matrix(X)
    subset = np.sort(np.asarray(subset, dtype=int))
    h = subset.size
    if h == X.shape[0]:
        return subset
    mu, s, Vt = _subset_svd(X[subset])
    if _svd_singular(s, X.shape[1]):
        raise _svd_exact_fit(mu, Vt, subset, f"{h} observations lie on a hyperplane")
    return _smallest(_svd_sq_distances(X, mu, s, Vt, h), h)


def subset_determinant(X, subset):
    """det of the classical covariance of X[subset] (the MCD objective)."""
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[:, None]
    Xs = X[np.sort(np.asarray(subset, dtype=int))]
    _, s, _ = _subset_svd(Xs)
    if s.size < X.shape[1]:
        return 0.0
    return float(np.prod(s**2 / (Xs.shape[0] - 1)))


def _default_mcd_h(n, d):
    return (n + d + 1) // 2


def _elemental_start(X, rng, d):
    n = X.shape[0]
    perm = rng.permutation(n)
    m = d + 1
    idx = perm[:m]
    mu, s, Vt = _subset_svd(X[idx])
    while _svd_singular(s, d) and m < n:
        m += 1
        idx = perm[:m]
        mu, s, Vt = _subset_svd(X[idx])
    return mu, s, Vt, idx


def _converge(X, subset, det, h, max_steps):
    """Run C-steps until the subset or the determinant stops changing.

    Returns (subset, det, exact_fit_error_or_None). A singular subset ends
    the run but stays a candidate, so it only wins on its determinant.
    """
    for _ in range(max_steps):
        try:
            new = c_step(X, subset)
        except ExactFitError as err:
            return subset, det, err
        new_det = subset_determinant(X, new)
        if np.array_equal(new, subset) or new_det >= det:
            if new_det < det:
                subset, det = new, new_det
            break
        subset, det = new, new_det
    return subset, det, None


def _run_start(X, h, d, rng, n_steps):
    mu, s, Vt, idx = _elemental_start(X, rng, d)
    if _svd_singular(s, d):
        raise _svd_exact_fit(mu, Vt, np.sort(idx), "all observations lie on a hyperplane")
    subset = _smallest(_svd_sq_distances(X, mu, s, Vt, idx.size), h)
    return _converge(X, subset, subset_determinant(X, subset), h, n_steps)


def _map_starts(fn, items):
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _exact_fit_result(X, err, h):
    subset = np.sort(np.asarray(err.subset, dtype=int))
    mu, S = _moments(X[subset])
    # widen to every point lying on the hyperplane
    on_plane = np.abs(X @ err.normal - err.offset) <= 1e-9 * (1 + np.abs(X).max())
    return LocationScatter(
        mu=mu,
        sigma=S,
        h=h,
        best_subset=subset,
        objective=0.0,
        exact_fit=True,
        hyperplane=(err.normal, err.offset),
        raw_mu=mu,
        raw_sigma=S,
        weights=on_plane.astype(float),
    )


def _reweight(X, mu_raw, sigma_raw, level):
    n, d = X.shape
    rd = np.sqrt(_sq_distances(X, mu_raw, sigma_raw))
    keep = rd <= chi2_cutoff(d, level)
    if keep.sum() <= d:
        return None
    mu, S = _moments(X[keep])
    if _is_singular(S):
        return None
    factor = level / chi2_cdf(chi2_ppf(level, d), d + 2)
    return mu, factor * S, keep.astype(float)


def _finish_mcd(X, subset, h, reweight, level, extra=None):
    n, d = X.shape
    mu_raw, S = _moments(X[subset])
    det = subset_determinant(X, subset)
    factor = mcd_consistency_factor(h, n, d)
    sigma_raw = factor * S
    out = LocationScatter(
        mu=mu_raw,
        sigma=sigma_raw,
        h=h,
        consistency_factor=factor,
        best_subset=subset,
        objective=det,
        raw_mu=mu_raw,
        raw_sigma=sigma_raw,
        extra=extra or {},
    )
    if reweight:
        rw = _reweight(X, mu_raw, sigma_raw, level)
        if rw is not None:
            out.mu, out.sigma, out.weights = rw
            out.reweighted = True
    return out


def fast_mcd(X, h=None, n_starts=500, seed=0, reweight=True, level=0.975):
    """Minimum Covariance Determinant by the FastMCD algorithm.

    Each of ``n_starts`` random elemental (d+1)-subsets seeds an h-subset that
    receives two C-steps; the ten best are iterated to convergence and the
    lowest determinant wins (ties broken by subset indices). Randomness for
    start i comes from ``SeedSequence(seed).spawn`` so results do not depend
    on scheduling.

    With ``h = n`` the result is the classical mean and covariance. An exact
    fit is reported through ``exact_fit`` and ``hyperplane`` rather than raised.
    """
    X = check_matrix(X)
    n, d = X.shape
    if n <= d:
        raise InputError(f"MCD needs n > d (n={n}, d={d}); use mrcd for wide data")
    h = _default_mcd_h(n, d) if h is None else check_h(h, n, d + 1)
    if h == n:
        subset = np.arange(n)
        mu, s, Vt = _subset_svd(X)
        if _svd_singular(s, d):
            return _exact_fit_result(X, _svd_exact_fit(mu, Vt, subset, ""), h)
        return _finish_mcd(X, subset, h, reweight, level)

    streams = np.random.SeedSequence(seed).spawn(n_starts)

    def start(ss):
        return _run_start(X, h, d, np.random.default_rng(ss), 2)

    try:
        trials = _map_starts(start, streams)
    except ExactFitError as err:
        return _exact_fit_result(X, err, h)
    trials.sort(key=lambda t: (t[1], tuple(t[0])))
    seen, best = set(), []
    for subset, det, _ in trials:
        key = tuple(subset)
        if key in seen:
            continue
        seen.add(key)
        best.append((subset, det))
        if len(best) == N_BEST:
            break
    finals = [_converge(X, s, det, h, MAX_CSTEPS) for s, det in best]
    subset, _, err = min(finals, key=lambda t: (t[1], tuple(t[0])))
    if err is not None:
        return _exact_fit_result(X, err, h)
    return _finish_mcd(X, subset, h, reweight, level, {"n_starts": n_starts, "seed": seed})


def exhaustive_mcd(X, h, budget=1_000_000, batch=20_000):
    """Global MCD optimum by enumerating every h-subset (test oracle).

    Raises InputError when C(n, h) exceeds ``budget``.
    """
    X = check_matrix(X, min_rows=2)
    n, d = X.shape
    h = check_h(h, n, 2)
    total = math.comb(n, h)
    if total > budget:
        raise InputError(f"C({n},{h}) = {total} subsets exceeds the budget {budget}")
    best_det, best_subset = math.inf, None
    combos = itertools.combinations(range(n), h)
    while True:
        chunk = np.array(list(itertools.islice(combos, batch)), dtype=int)
        if chunk.size == 0:
            break
        Xb = X[chunk]
        dev = Xb - Xb.mean(axis=1, keepdims=True)
        S = np.einsum("bij,bik->bjk", dev, dev) / (h - 1)
        dets = np.linalg.det(S)
        i = int(np.argmin(dets))
        if dets[i] < best_det:
            best_det, best_subset = float(dets[i]), chunk[i]
    mu, S = _moments(X[best_subset])
    if _is_singular(S):
        normal, offset = _hyperplane(mu, S)
        return _exact_fit_result(X, ExactFitError("", normal, offset, best_subset), h)
    out = _finish_mcd(X, best_subset, h, reweight=False, level=0.975)
    out.objective = best_det
    return out


# -- MRCD --------------------------------------------------------------------


def make_target(d, target="identity"):
    """Target matrix: ``"identity"`` or ``("equicorrelation", c)``."""
    if target == "identity":
        return np.eye(d)
    if isinstance(target, (tuple, list)) and len(target) == 2 and target[0] == "equicorrelation":
        c = float(target[1])
        if d > 1 and not -1.0 / (d - 1) < c < 1.0:
            raise InputError(f"equicorrelation c={c} does not give a positive definite target")
        return (1.0 - c) * np.eye(d) + c * np.ones((d, d))
    raise InputError(f"unknown target {target!r}")


def _regularized(S, T, rho):
    return rho * T + (1.0 - rho) * S


def _mrcd_logdet(Z, subset, T, rho):
    _, S = _moments(Z[subset])
    sign, logdet = np.linalg.slogdet(_regularized(S, T, rho))
    return logdet if sign > 0 else -math.inf


def mrcd_c_step(Z, subset, T, rho):
    """C-step on the regularized determinant det(rho T + (1 - rho) S_H)."""
    subset = np.sort(np.asarray(subset, dtype=int))
    mu, S = _moments(Z[subset])
    K = _regularized(S, T, rho)
    return _smallest(_sq_distances(Z, mu, K), subset.size)


def _pick_rho(S0, T, max_cond=1000.0):
    for rho in np.round(np.arange(1, 101) / 100.0, 2):
        if np.linalg.cond(_regularized(S0, T, rho)) <= max_cond:
            return float(rho)
    return 1.0


def standardize_columns(X):
    """Center each column by its median and divide by its Qn."""
    X = check_matrix(X, min_rows=2)
    center = np.median(X, axis=0)
    scale = np.array([qn(X[:, j]) for j in range(X.shape[1])])
    if np.any(scale == 0):
        bad = np.flatnonzero(scale == 0).tolist()
        raise InputError(f"columns {bad} have zero Qn scale")
    return (X - center) / scale, center, scale


def mrcd(X, h=None, rho=None, target="identity", n_starts=500, seed=0):
    """Minimum Regularized Covariance Determinant.

    Columns are standardized by (median, Qn); the h-subset H minimizing
    det(rho T + (1 - rho) S_H) is searched by C-steps from a deterministic
    start (the h rows nearest the coordinatewise median) and ``n_starts``
    random h-subsets. When ``rho`` is None it is the smallest value on the
    grid 0.01, 0.02, ..., 1 for which the regularized matrix at the
    deterministic start has condition number <= 1000.

    ``sigma`` is reported in the original units; the standardized regularized
    scatter is kept in ``extra["standardized_sigma"]``.
    """
    Z, center, scale = standardize_columns(X)
    n, d = Z.shape
    h = math.ceil(0.75 * n) if h is None else check_h(h, n, 2)
    T = make_target(d, target)
    start0 = _smallest(np.einsum("ij,ij->i", Z, Z), h)
    if rho is None:
        rho = _pick_rho(_moments(Z[start0])[1], T)
    elif not 0.0 < rho <= 1.0:
        raise InputError(f"rho must lie in (0, 1], got {rho}")

    rng = np.random.default_rng(seed)
    starts = [start0] + [np.sort(rng.choice(n, h, replace=False)) for _ in range(n_starts)]

    def run(subset):
        val = _mrcd_logdet(Z, subset, T, rho)
        for _ in range(MAX_CSTEPS):
            new = mrcd_c_step(Z, subset, T, rho)
            new_val = _mrcd_logdet(Z, new, T, rho)
            if np.array_equal(new, subset) or new_val >= val:
                break
            subset, val = new, new_val
        return subset, val

    subset, logdet = min(_map_starts(run, starts), key=lambda t: (t[1], tuple(t[0])))
    m, S = _moments(Z[subset])
    factor = mcd_consistency_factor(h, n, d)
    K = _regularized(factor * S, T, rho)
    D = np.diag(scale)
    return LocationScatter(
        mu=center + scale * m,
        sigma=D @ K @ D,
        h=h,
        consistency_factor=factor,
        best_subset=subset,
        objective=float(math.exp(logdet)),
        raw_mu=center + scale * m,
        raw_sigma=D @ K @ D,
        extra={
            "rho": rho,
            "target": T,
            "logdet": float(logdet),
            "standardized_sigma": K,
            "center": center,
            "scale": scale,
        },
    )


# -- projection outlyingness ---------------------------------------------------


def sample_directions(X, n_dirs, seed=0):
    """Unit directions: the d coordinate axes plus normalized differences of random row pairs."""
    X = check_matrix(X, min_rows=2)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    dirs = [np.eye(d)]
    if n_dirs > 0:
        i = rng.integers(0, n, size=n_dirs)
        j = rng.integers(0, n - 1, size=n_dirs)
        j = j + (j >= i)
        diff = X[i] - X[j]
        norm = np.linalg.norm(diff, axis=1)
        dirs.append(diff[norm > 0] / norm[norm > 0, None])
    return np.vstack(dirs)


def projection_outlyingness(X, directions, chunk=256):
    """max_u |x^T u - med(X u)| / MAD(X u) over the given unit directions."""
    X = check_matrix(X, min_rows=2)
    outl = np.zeros(X.shape[0])
    used = skipped = 0
    for start in range(0, directions.shape[0], chunk):
        P = X @ directions[start:start + chunk].T
        med = np.median(P, axis=0)
        dev = np.abs(P - med)
        spread = MAD_CONSTANT * np.median(dev, axis=0)
        ok = spread > 0
        used += int(ok.sum())
        skipped += int((~ok).sum())
        if ok.any():
            outl = np.maximum(outl, (dev[:, ok] / spread[ok]).max(axis=1))
    if used == 0:
        raise SingularMatrixError("every sampled direction has zero MAD")
    return OutlyingnessReport(outl, used, skipped)


def stahel_donoho(X, n_dirs=500, seed=0):
    """Stahel-Donoho outlyingness approximated over sampled directions."""
    X = check_matrix(X, min_rows=2)
    return projection_outlyingness(X, sample_directions(X, n_dirs, seed))


# -- plots -------------------------------------------------------------------


def dd_plot_data(X, ls_classical, ls_robust, level=0.975):
    """Paired classical / robust distances for the distance-distance plot."""
    X = check_matrix(X)
    md = mahalanobis_distances(X, ls_classical)
    rd = mahalanobis_distances(X, ls_robust)
    return DistanceReport(md, rd, chi2_cutoff(X.shape[1], level))


def tolerance_ellipse(ls, level=0.975, n_points=200):
    """Closed polyline (n_points + 1, 2) of points at distance sqrt(chi2_{2,level})."""
    mu = np.asarray(ls.mu, float)
    if mu.shape[0] != 2:
        raise InputError(f"tolerance ellipse needs d = 2, got d = {mu.shape[0]}")
    try:
        L = np.linalg.cholesky(ls.sigma)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("scatter matrix is not positive definite") from None
    t = np.linspace(0.0, 2.0 * np.pi, n_points + 1)
    t[-1] = 0.0
    circle = np.vstack([np.cos(t), np.sin(t)])
    return (mu[:, None] + math.sqrt(chi2_ppf(level, 2)) * (L @ circle)).T


# -- estimator API -----------------------------------------------------------


class _RobustCovarianceBase(OutlierMixin, BaseEstimator):
    def _store(self, ls, X):
        self.result_ = ls
        self.location_ = ls.mu
        self.covariance_ = ls.sigma
        self.raw_location_ = ls.raw_mu
        self.raw_covariance_ = ls.raw_sigma
        self.support_ = np.zeros(X.shape[0], bool)
        self.support_[ls.best_subset] = True
        self.objective_ = ls.objective
        self.exact_fit_ = ls.exact_fit
        self.n_features_in_ = X.shape[1]
        if not ls.exact_fit:
            self.dist_ = mahalanobis_distances(X, ls)
        self.cutoff_ = chi2_cutoff(X.shape[1], self.level)

    def mahalanobis(self, X):
        """Robust distances (not squared) of the rows of X."""
        check_is_fitted(self, "result_")
        return mahalanobis_distances(X, self.result_)

    def score_samples(self, X):
        return -self.mahalanobis(X)

    def decision_function(self, X):
        return self.cutoff_ - self.mahalanobis(X)

    def predict(self, X):
        """+1 for inliers, -1 for rows beyond the chi-square cutoff."""
        return np.where(self.mahalanobis(X) > self.cutoff_, -1, 1)


class MinCovDet(_RobustCovarianceBase):
    """FastMCD estimator of location and scatter.

    Parameters
    ----------
    h : int, optional
        Subset size; defaults to (n + d + 1) // 2.
    n_starts : int
        Number of random elemental starts.
    random_state : int
        Seed of the start generator.
    reweight : bool
        Apply one reweighting step at the ``level`` chi-square cutoff.
    level : float
        Tail probability for flagging and reweighting.
    """

    def __init__(self, h=None, n_starts=500, random_state=0, reweight=True, level=0.975):
        self.h = h
        self.n_starts = n_starts
        self.random_state = random_state
        self.reweight = reweight
        self.level = level

    def fit(self, X, y=None):
        X = check_matrix(X)
        ls = fast_mcd(X, self.h, self.n_starts, self.random_state, self.reweight, self.level)
        self._store(ls, X)
        return self


class RegularizedMinCovDet(_RobustCovarianceBase):
    """MRCD estimator; usable when d >= n."""

    def __init__(self, h=None, rho=None, target="identity", n_starts=500,
                 random_state=0, level=0.975):
        self.h = h
        self.rho = rho
        self.target = target
        self.n_starts = n_starts
        self.random_state = random_state
        self.level = level

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        ls = mrcd(X, self.h, self.rho, self.target, self.n_starts, self.random_state)
        self.rho_ = ls.extra["rho"]
        self._store(ls, X)
        return self
