"""Robust discriminant analysis and trimmed k-means."""

from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .covariance import _is_singular, classical_moments, fast_mcd
from .exceptions import InputError, SingularMatrixError
from .validation import check_h, check_matrix, check_sample

UNASSIGNED = -1


@dataclass
class DiscriminantModel:
    """Per-group centers, scatters and priors.

    For LDA ``sigmas`` holds the pooled scatter repeated for every group.
    """

    classes: np.ndarray
    mus: np.ndarray  # J x d
    sigmas: np.ndarray  # J x d x d
    priors: np.ndarray
    kind: str
    estimator: str
    pooled: np.ndarray = None


@dataclass
class Classification:
    labels: np.ndarray
    scores: np.ndarray
    ties: np.ndarray


@dataclass
class ClusterResult:
    """``assignment`` holds 0..k-1 for assigned rows and -1 for trimmed rows."""

    k: int
    centers: np.ndarray
    assignment: np.ndarray
    h: int
    objective: float
    n_iter: int = 0
    history: list = field(default_factory=list)


def _group_moments(Xj, estimator, h_frac, seed):
    nj, d = Xj.shape
    if estimator == "classical":
        ls = classical_moments(Xj)
        return ls.mu, ls.sigma
    if estimator == "mcd":
        h = None if h_frac is None else max(d + 1, int(math.floor(h_frac * nj)))
        ls = fast_mcd(Xj, h=h, seed=seed, reweight=True)
        if ls.exact_fit:
            raise SingularMatrixError("group data lie on a hyperplane")
        return ls.mu, ls.sigma
    raise InputError(f"unknown estimator {estimator!r}")


def train_discriminant(X, labels, kind="qda", estimator="mcd", h_frac=None,
                       priors=None, seed=0):
    """Fit group centers and scatters with classical moments or reweighted MCD.

    LDA pools the group scatters with weights (n_j - 1) / (n - J). Priors
    default to the group shares of the training data.
    """
    X = check_matrix(X)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise InputError("labels and X differ in length")
    if kind not in ("qda", "lda"):
        raise InputError(f"unknown kind {kind!r}")
    n, d = X.shape
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < d + 2]
    if small.size:
        raise InputError(f"groups {small.tolist()} have fewer than d + 2 = {d + 2} members")
    mus, sigmas = [], []
    for g in classes:
        mu, S = _group_moments(X[labels == g], estimator, h_frac, seed)
        mus.append(mu)
        sigmas.append(S)
    mus, sigmas = np.array(mus), np.array(sigmas)
    if priors is None:
        priors = counts / n
    else:
        priors = check_sample(priors, name="priors")
        if priors.size != classes.size or np.any(priors <= 0):
            raise InputError("need one positive prior per group")
        priors = priors / priors.sum()
    pooled = None
    if kind == "lda":
        w = (counts - 1) / (n - classes.size)
        pooled = np.einsum("j,jab->ab", w, sigmas)
        if _is_singular(pooled):
            raise SingularMatrixError("pooled scatter matrix is singular")
        sigmas = np.repeat(pooled[None], classes.size, axis=0)
    else:
        for g, S in zip(classes, sigmas):
            if _is_singular(S):
                raise SingularMatrixError(f"scatter of group {g!r} is singular")
    return DiscriminantModel(classes, mus, sigmas, priors, kind, estimator, pooled)


def qda_scores(model, X):
    """-1/2 ln|Sigma_j| - 1/2 (x - mu_j)^T Sigma_j^-1 (x - mu_j) + ln p_j, one column per group."""
    X = check_matrix(X)
    out = np.empty((X.shape[0], model.classes.size))
    for j, (mu, S, p) in enumerate(zip(model.mus, model.sigmas, model.priors)):
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            raise SingularMatrixError(f"scatter of group {model.classes[j]!r} is singular")
        dev = X - mu
        md2 = np.einsum("ij,ij->i", dev, np.linalg.solve(S, dev.T).T)
        out[:, j] = -0.5 * logdet - 0.5 * md2 + math.log(p)
    return out


def lda_scores(model, X):
    """mu_j^T Sigma^-1 x - 1/2 mu_j^T Sigma^-1 mu_j + ln p_j with the common scatter."""
    X = check_matrix(X)
    S = model.pooled if model.pooled is not None else model.sigmas[0]
    if _is_singular(S):
        raise SingularMatrixError("common scatter is singular")
    A = np.linalg.solve(S, model.mus.T)  # d x J, columns Sigma^-1 mu_j
    const = -0.5 * np.einsum("jd,dj->j", model.mus, A) + np.log(model.priors)
    return X @ A + const


def classify(model, X):
    """Highest score wins; ties go to the first group and are reported."""
    scores = qda_scores(model, X) if model.kind == "qda" else lda_scores(model, X)
    best = np.argmax(scores, axis=1)  # first maximum on ties
    top = scores[np.arange(scores.shape[0]), best]
    ties = (np.isclose(scores, top[:, None], rtol=1e-12, atol=1e-12)).sum(axis=1) > 1
    return Classification(model.classes[best], scores, ties)


class RobustDiscriminantAnalysis(ClassifierMixin, BaseEstimator):
    """QDA or LDA with classical or MCD plug-in moments."""

    def __init__(self, kind="qda", estimator="mcd", h_frac=None, priors=None, random_state=0):
        self.kind = kind
        self.estimator = estimator
        self.h_frac = h_frac
        self.priors = priors
        self.random_state = random_state

    def fit(self, X, y):
        self.model_ = train_discriminant(X, y, self.kind, self.estimator, self.h_frac,
                                         self.priors, self.random_state)
        self.classes_ = self.model_.classes
        self.n_features_in_ = self.model_.mus.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return classify(self.model_, X).scores

    def predict(self, X):
        check_is_fitted(self, "model_")
        return classify(self.model_, X).labels


# -- trimmed k-means -----------------------------------------------------------


def _sq_dists(X, centers):
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def concentration_step(X, centers, h):
    """Keep the h rows nearest any center, assign them, recompute the means.

    Returns (new_centers, assignment, objective) where the objective is
    measured against the new centers. An emptied cluster keeps its old center
    and is reported with a NaN objective.
    """
    k = centers.shape[0]
    D = _sq_dists(X, centers)
    nearest = np.argmin(D, axis=1)  # lowest index on ties
    dmin = D[np.arange(X.shape[0]), nearest]
    keep = np.sort(np.argsort(dmin, kind="stable")[:h])
    assignment = np.full(X.shape[0], UNASSIGNED)
    assignment[keep] = nearest[keep]
    new = centers.copy()
    empty = False
    for j in range(k):
        members = assignment == j
        if members.any():
            new[j] = X[members].mean(axis=0)
        else:
            empty = True
    if empty:
        return new, assignment, float("nan")
    return new, assignment, trimmed_objective(X, new, assignment)


def trimmed_objective(X, centers, assignment):
    """Sum over assigned rows of the squared distance to their center."""
    on = assignment >= 0
    return float(((X[on] - centers[assignment[on]]) ** 2).sum())


def _one_start(X, k, h, rng, max_iter, restarts=20):
    n = X.shape[0]
    for _ in range(restarts):
        centers = X[rng.choice(n, k, replace=False)].copy()
        assignment = None
        obj = math.inf
        history = []
        ok = True
        for it in range(max_iter):
            centers, new_assign, new_obj = concentration_step(X, centers, h)
            if math.isnan(new_obj):
                ok = False
                break
            history.append(new_obj)
            done = assignment is not None and np.array_equal(new_assign, assignment)
            assignment, obj = new_assign, new_obj
            if done:
                break
        if ok:
            return centers, assignment, obj, it + 1, history
    raise InputError("could not find a start without empty clusters")


def trimmed_kmeans(X, k, h=None, n_starts=50, seed=0, max_iter=100):
    """Trimmed k-means: the h-subset and k means minimizing within-group squares.

    Global trimming: the n - h rows farthest from their nearest center are
    left unassigned. Best of ``n_starts`` random starts, each drawn from its
    own child seed. ``h`` defaults to floor(0.75 n).
    """
    X = check_matrix(X)
    n, d = X.shape
    if k < 1:
        raise InputError("k must be at least 1")
    h = max(k * (d + 1), int(math.floor(0.75 * n))) if h is None else h
    h = check_h(h, n, k * (d + 1))
    best = None
    for ss in np.random.SeedSequence(seed).spawn(n_starts):
        centers, assignment, obj, it, hist = _one_start(
            X, k, h, np.random.default_rng(ss), max_iter
        )
        if best is None or obj < best[2]:
            best = (centers, assignment, obj, it, hist)
    centers, assignment, obj, it, hist = best
    return ClusterResult(k, centers, assignment, h, obj, it, hist)


class TrimmedKMeans(ClusterMixin, BaseEstimator):
    """Trimmed k-means; ``labels_`` uses -1 for the n - h trimmed rows."""

    def __init__(self, n_clusters=2, h=None, n_starts=50, random_state=0, max_iter=100):
        self.n_clusters = n_clusters
        self.h = h
        self.n_starts = n_starts
        self.random_state = random_state
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_matrix(X)
        res = trimmed_kmeans(X, self.n_clusters, self.h, self.n_starts,
                             self.random_state, self.max_iter)
        self.result_ = res
        self.cluster_centers_ = res.centers
        self.labels_ = res.assignment
        self.objective_ = res.objective
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Nearest center for every row (no trimming)."""
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(_sq_dists(check_matrix(X), self.cluster_centers_), axis=1)
