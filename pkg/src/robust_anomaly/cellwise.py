"""Cellwise outlier flags, rowwise flags and block-aggregated cell maps.

Cells are scored column by column with robust z-scores, so a cell's flag
depends on its own column only. A full DetectDeviatingCells predictor (which
borrows strength from correlated columns) would slot in as another
``method`` of :func:`flag_cells`.
"""

from dataclasses import dataclass, field

import numpy as np

from .covariance import fast_mcd, mahalanobis_distances
from .distributions import chi2_cutoff
from .exceptions import InputError
from .pca import pca_distances, robust_pca
from .univariate import DEFAULT_CUTOFF, RobustStandardizer
from .validation import check_matrix

HIGH, OK, LOW = 1, 0, -1
_NAMES = {HIGH: "high", OK: "ok", LOW: "low"}


@dataclass
class CellFlags:
    """Robust cell scores and their signed flags (+1 high, -1 low, 0 ok).

    Missing cells have NaN scores, ``missing`` True and signed value 0.
    """

    resid: np.ndarray
    cutoff: float
    degenerate: np.ndarray
    signed: np.ndarray = field(init=False)
    missing: np.ndarray = field(init=False)

    def __post_init__(self):
        self.missing = np.isnan(self.resid)
        r = np.where(self.missing, 0.0, self.resid)
        self.signed = np.where(r > self.cutoff, HIGH, np.where(r < -self.cutoff, LOW, OK))
        self.signed = self.signed.astype(np.int8)

    @property
    def flag(self):
        out = np.vectorize(_NAMES.get, otypes=[object])(self.signed)
        out[self.missing] = "missing"
        return out


@dataclass
class CellMapGrid:
    """Block means of signed cell values (cellmap) or row flags (rowmap)."""

    cells: np.ndarray
    block_rows: int
    block_cols: int
    row_ticks: list
    col_ticks: list
    kind: str = "cellmap"


def flag_cells(X, cutoff=DEFAULT_CUTOFF, scale="mad", method="univariate"):
    """Flag cells whose column-wise robust score exceeds ``cutoff`` in absolute value.

    Columns with zero robust scale are listed in ``degenerate`` and all their
    cells are ok. NaN cells are reported as missing.
    """
    if method != "univariate":
        raise InputError(f"cell flagging method {method!r} is not available")
    X = check_matrix(X, allow_nan=True)
    std = RobustStandardizer(scale=scale).fit(X)
    Z = std.transform(X)
    Z[:, std.degenerate_] = np.where(np.isnan(X[:, std.degenerate_]), np.nan, 0.0)
    return CellFlags(Z, cutoff, std.degenerate_)


def rowwise_flags(X, method="fast_mcd", k=None, h=None, seed=0, level=0.975, n_starts=500):
    """Flag rows whose robust distance (fast_mcd) or orthogonal distance (robust_pca) exceeds its cutoff."""
    X = check_matrix(X)
    n, d = X.shape
    if method == "fast_mcd":
        ls = fast_mcd(X, h=h, n_starts=n_starts, seed=seed, reweight=True, level=level)
        return mahalanobis_distances(X, ls) > chi2_cutoff(d, level)
    if method == "robust_pca":
        k = k if k is not None else max(1, min(d - 1, n - 1, 10))
        model = robust_pca(X, k, h=h, seed=seed)
        omap = pca_distances(model, X, level)
        return omap.od > omap.od_cutoff
    raise InputError(f"unknown rowwise method {method!r}")


def _ticks(n, size):
    return [f"{i + 1}-{min(i + size, n)}" if size > 1 else str(i + 1) for i in range(0, n, size)]


def _block_means(values, br, bc):
    n, d = values.shape
    out = np.full((-(-n // br), -(-d // bc)), np.nan)
    for bi, i in enumerate(range(0, n, br)):
        for bj, j in enumerate(range(0, d, bc)):
            block = values[i:i + br, j:j + bc]
            block = block[~np.isnan(block)]
            if block.size:
                out[bi, bj] = block.mean()
    return out


def block_aggregate(flags, br=5, bc=5):
    """Mean signed value of every br x bc block; edge blocks average their actual members.

    ``flags`` is a CellFlags or an array of signed values (NaN for missing).
    """
    if br < 1 or bc < 1:
        raise InputError("block sizes must be at least 1")
    if isinstance(flags, CellFlags):
        values = np.where(flags.missing, np.nan, flags.signed.astype(float))
    else:
        values = np.asarray(flags, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
    n, d = values.shape
    return CellMapGrid(_block_means(values, br, bc), br, bc, _ticks(n, br), _ticks(d, bc))


def rowmap(row_flags, br=5):
    """Fraction of flagged rows per block of br rows (1 black, 0 yellow)."""
    values = np.asarray(row_flags, dtype=float)[:, None]
    if br < 1:
        raise InputError("block size must be at least 1")
    return CellMapGrid(_block_means(values, br, 1), br, 1, _ticks(values.shape[0], br),
                       ["row"], kind="rowmap")


def contaminate_cells(X, fraction, magnitude=10.0, seed=0):
    """Copy of X with a random ``fraction`` of cells shifted by +/- magnitude * column scale."""
    X = check_matrix(X).copy()
    rng = np.random.default_rng(seed)
    n, d = X.shape
    m = int(round(fraction * n * d))
    cells = rng.choice(n * d, m, replace=False)
    rows, cols = np.divmod(cells, d)
    scale = X.std(axis=0, ddof=1)
    sign = rng.choice([-1.0, 1.0], m)
    X[rows, cols] += sign * magnitude * scale[cols]
    mask = np.zeros((n, d), bool)
    mask[rows, cols] = True
    return X, mask
