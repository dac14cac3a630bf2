"""Robust principal components and the orthogonal/score distance outlier map.

``robust_pca`` is a lightweight ROBPCA-style hybrid: Stahel-Donoho
outlyingness picks the h least outlying rows, whose covariance is then
eigendecomposed. It skips ROBPCA's internal dimension reduction and the
MCD refinement inside the score space.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .covariance import stahel_donoho
from .distributions import chi2_cutoff, norm_ppf
from .exceptions import InputError, SingularMatrixError
from .regression import classify_points
from .univariate import mad, median, qn
from .validation import check_h, check_matrix

REGULAR = "regular"
GOOD_LEVERAGE = "good_leverage"
ORTHOGONAL = "orthogonal"
BAD_LEVERAGE = "bad_leverage"


@dataclass
class PCAModel:
    center: np.ndarray
    loadings: np.ndarray  # d x k, orthonormal columns
    eigenvalues: np.ndarray  # k, descending
    method: str
    extra: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.loadings.shape[1]

    def scores(self, X):
        return (check_matrix(X) - self.center) @ self.loadings


@dataclass
class PCAOutlierMap:
    od: np.ndarray
    sd: np.ndarray
    od_cutoff: float
    sd_cutoff: float
    classes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.classes = classify_points(
            self.od > self.od_cutoff, self.sd > self.sd_cutoff,
            labels=(REGULAR, ORTHOGONAL, GOOD_LEVERAGE, BAD_LEVERAGE),
        )


def _fix_signs(V):
    # largest-magnitude entry of each loading is positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _top_eigen(C, k):
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def _robust_eigenvalues(Xc, V):
    T = Xc @ V
    return np.array([qn(T[:, j]) ** 2 for j in range(V.shape[1])])


def _sort_by(vals, V):
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]


def _check_k(k, n, d):
    if not 1 <= k <= min(n - 1, d):
        raise InputError(f"k={k} must lie in [1, min(n-1, d)] = [1, {min(n - 1, d)}]")


def classical_pca(X, k):
    """Eigenvectors of the empirical covariance matrix."""
    X = check_matrix(X, min_rows=2)
    n, d = X.shape
    _check_k(k, n, d)
    center = X.mean(axis=0)
    vals, vecs = _top_eigen(np.cov(X, rowvar=False).reshape(d, d), k)
    return PCAModel(center, _fix_signs(vecs[:, :k]), vals[:k], "classical",
                    {"scree": vals})


def robust_pca(X, k, h=None, n_dirs=500, seed=0):
    """Projection-pursuit trimming followed by PCA of the retained rows.

    Keeps the h rows with the smallest Stahel-Donoho outlyingness (default
    h = floor(0.75 n)). The eigenvalues are robust: squared Qn of each score
    column over all rows, with components ordered by them.
    """
    X = check_matrix(X, min_rows=2)
    n, d = X.shape
    _check_k(k, n, d)
    h = max(k + 1, int(math.floor(0.75 * n))) if h is None else check_h(h, n, k + 1)
    outl = stahel_donoho(X, n_dirs, seed).outl
    kept = np.sort(np.argsort(outl, kind="stable")[:h])
    Xk = X[kept]
    center = Xk.mean(axis=0)
    vals, vecs = _top_eigen(np.cov(Xk, rowvar=False).reshape(d, d), k)
    if vals[k - 1] <= 1e-12 * max(vals[0], np.finfo(float).tiny):
        raise SingularMatrixError(f"retained rows span fewer than k={k} dimensions")
    V = _fix_signs(vecs[:, :k])
    lam, V = _sort_by(_robust_eigenvalues(X - center, V), V)
    return PCAModel(center, V, lam, "robpca",
                    {"outlyingness": outl, "kept": kept, "scree": vals, "h": h})


def spatial_median(X, tol=1e-8, max_iter=1000):
    """L1-median by Weiszfeld iteration started at the coordinatewise median."""
    X = check_matrix(X)
    c = np.median(X, axis=0)
    for _ in range(max_iter):
        dist = np.linalg.norm(X - c, axis=1)
        far = dist > 1e-12
        if not far.any():
            return c
        w = 1.0 / dist[far]
        new = (X[far] * w[:, None]).sum(axis=0) / w.sum()
        if np.linalg.norm(new - c) <= tol * max(1.0, np.linalg.norm(c)):
            return new
        c = new
    return c


def spherical_pca(X, k, tol=1e-8):
    """PCA of the rows projected onto the unit sphere around the spatial median.

    Eigenvalues are Qn of the (unprojected) scores, squared.
    """
    X = check_matrix(X, min_rows=2)
    n, d = X.shape
    if not 1 <= k <= d:
        raise InputError(f"k={k} must lie in [1, d={d}]")
    center = spatial_median(X, tol)
    Xc = X - center
    norm = np.linalg.norm(Xc, axis=1)
    if not np.any(norm > 0):
        raise SingularMatrixError("all points coincide with the center")
    U = np.zeros_like(Xc)
    U[norm > 0] = Xc[norm > 0] / norm[norm > 0, None]
    vals, vecs = _top_eigen(np.cov(U, rowvar=False).reshape(d, d), k)
    V = _fix_signs(vecs[:, :k])
    lam, V = _sort_by(_robust_eigenvalues(Xc, V), V)
    return PCAModel(center, V, lam, "spherical",
                    {"scree": _robust_eigenvalues(Xc, _fix_signs(vecs))})


def od_cutoff(od, level=0.975):
    """Wilson-Hilferty cutoff (med(od^2/3) + MAD(od^2/3) z_level)^(3/2)."""
    t = np.asarray(od, float) ** (2.0 / 3.0)
    return float((median(t) + mad(t) * norm_ppf(level)) ** 1.5)


def pca_distances(model, X, level=0.975, od_cut=None):
    """Orthogonal and score distances with their cutoffs and the four classes.

    ``od_cut`` defaults to the Wilson-Hilferty cutoff of the od of X itself.
    """
    X = check_matrix(X)
    if X.shape[1] != model.center.shape[0]:
        raise InputError("X does not match the model dimension")
    if np.any(model.eigenvalues <= 0):
        raise SingularMatrixError("model has a zero eigenvalue; score distances undefined")
    Xc = X - model.center
    T = Xc @ model.loadings
    od = np.linalg.norm(Xc - T @ model.loadings.T, axis=1)
    sd = np.sqrt((T**2 / model.eigenvalues).sum(axis=1))
    if od_cut is None:
        od_cut = od_cutoff(od, level)
    return PCAOutlierMap(od, sd, od_cut, chi2_cutoff(model.k, level))


def principal_angle(A, B):
    """Largest principal angle (degrees) between the column spans of A and B."""
    Qa, _ = np.linalg.qr(np.asarray(A, float))
    Qb, _ = np.linalg.qr(np.asarray(B, float))
    if Qa.shape[1] != Qb.shape[1]:
        raise InputError("subspaces must have the same dimension")
    # sin of the largest angle; more accurate than arccos for tiny angles
    sin = np.linalg.norm(Qb - Qa @ (Qa.T @ Qb), 2)
    return float(np.degrees(np.arcsin(min(1.0, sin))))


class RobustPCA(TransformerMixin, BaseEstimator):
    """Robust PCA with an OD/SD outlier map.

    ``method`` is ``"robpca"`` (projection-pursuit trimming), ``"spherical"``
    or ``"classical"``. ``predict`` returns -1 for rows whose orthogonal
    distance exceeds the cutoff learned at fit time.
    """

    def __init__(self, n_components=2, method="robpca", h=None, n_dirs=500,
                 random_state=0, level=0.975):
        self.n_components = n_components
        self.method = method
        self.h = h
        self.n_dirs = n_dirs
        self.random_state = random_state
        self.level = level

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        k = self.n_components
        if self.method == "robpca":
            model = robust_pca(X, k, self.h, self.n_dirs, self.random_state)
        elif self.method == "spherical":
            model = spherical_pca(X, k)
        elif self.method == "classical":
            model = classical_pca(X, k)
        else:
            raise InputError(f"unknown method {self.method!r}")
        self.model_ = model
        self.components_ = model.loadings.T
        self.center_ = model.center
        self.eigenvalues_ = model.eigenvalues
        omap = pca_distances(model, X, self.level)
        self.od_cutoff_ = omap.od_cutoff
        self.sd_cutoff_ = omap.sd_cutoff
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return self.model_.scores(X)

    def inverse_transform(self, T):
        check_is_fitted(self, "model_")
        return np.asarray(T, float) @ self.components_ + self.center_

    def outlier_map(self, X):
        check_is_fitted(self, "model_")
        return pca_distances(self.model_, X, self.level, od_cut=self.od_cutoff_)

    def predict(self, X):
        return np.where(self.outlier_map(X).od > self.od_cutoff_, -1, 1)
