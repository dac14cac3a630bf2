import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import CLEAN, CONTAMINATED, qn_oracle
from robust_anomaly import (
    DegenerateScaleError,
    InputError,
    NonConvergenceWarning,
    PsiSpec,
    RobustStandardizer,
    boxplot_fences,
    iqr_normalized,
    kth_pairwise_difference,
    m_location,
    mad,
    median,
    qn,
    quartiles,
    robust_scores,
    z_scores,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# -- median -------------------------------------------------------------------

def test_median_values(contaminated):
    assert median(contaminated) == pytest.approx(6.28)
    assert median([5]) == 5
    assert median([1, 2, 3, 4]) == 2.5


def test_median_rejects_empty_and_nan():
    with pytest.raises(InputError):
        median([])
    with pytest.raises(InputError):
        median([1.0, np.nan])


# -- MAD / Qn / IQR -----------------------------------------------------------

def test_mad_values(clean, contaminated):
    assert mad(contaminated) == pytest.approx(0.044, abs=1e-3)
    assert mad(clean) == pytest.approx(0.044, abs=1e-3)
    assert mad(clean) == pytest.approx(mad(contaminated), abs=1e-12)
    assert mad([3.0] * 6) == 0.0


def test_qn_values(clean):
    assert qn(clean) == pytest.approx(0.0667, abs=5e-4)
    assert qn(clean) == pytest.approx(qn_oracle(clean), abs=1e-12)
    assert qn([2.0, 2.0, 2.0]) == 0.0
    with pytest.raises(InputError):
        qn([1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=2, max_size=50))
def test_qn_matches_pairwise_oracle(values):
    assert qn(values) == pytest.approx(qn_oracle(values), rel=1e-12, abs=1e-12)


def test_qn_fast_path_with_ties():
    rng = np.random.default_rng(11)
    for n in (65, 100, 257):
        x = np.round(rng.standard_t(2, n), 1)
        assert qn(x) == pytest.approx(qn_oracle(x), rel=1e-12)
        k = int(rng.integers(1, n * (n - 1) // 2 + 1))
        gaps = np.sort(np.abs(x[:, None] - x[None, :])[np.triu_indices(n, 1)])
        assert kth_pairwise_difference(x, k) == gaps[k - 1]


def test_iqr_values(clean):
    assert quartiles(clean) == (6.25, 6.31)
    assert iqr_normalized(clean) == pytest.approx(0.7413 * 0.06, abs=1e-12)
    assert iqr_normalized(clean) == pytest.approx(0.0445, abs=1e-4)
    assert iqr_normalized([4.0] * 5) == 0.0
    assert iqr_normalized(clean + 100.0) == pytest.approx(iqr_normalized(clean), abs=1e-12)
    with pytest.raises(InputError):
        iqr_normalized([1, 2, 3])


def test_fences(clean, contaminated):
    lo, hi = boxplot_fences(clean)
    assert lo == pytest.approx(6.16, abs=0.01)
    assert hi == pytest.approx(6.40, abs=0.01)
    assert boxplot_fences([7.0] * 4) == (7.0, 7.0)
    assert contaminated[3] > boxplot_fences(contaminated)[1]


# -- M-location ---------------------------------------------------------------

@pytest.mark.parametrize("psi", [PsiSpec.huber(), PsiSpec.bisquare()])
def test_m_location_symmetric(psi):
    assert m_location([-1.0, 0.0, 1.0], psi) == pytest.approx(0.0, abs=1e-12)


def test_m_location_clean_hull(clean):
    mu = m_location(clean, PsiSpec.huber(1.345))
    assert 6.25 <= mu <= 6.34


def test_m_location_bisquare_grid_oracle(contaminated):
    psi = PsiSpec.bisquare(4.685)
    mu = m_location(contaminated, psi)
    assert abs(mu - 6.28) < 0.05
    # dense grid search of the rho objective near the bulk
    sigma = qn(contaminated)
    grid = np.linspace(6.0, 6.6, 60001)
    obj = psi.rho((contaminated[None, :] - grid[:, None]) / sigma).sum(axis=1)
    assert mu == pytest.approx(grid[np.argmin(obj)], abs=1e-3)


def test_m_location_estimating_equation(contaminated):
    psi = PsiSpec.huber()
    mu = m_location(contaminated, psi, tol=1e-12, max_iter=1000)
    assert abs(psi.psi((contaminated - mu) / qn(contaminated)).sum()) < 1e-8


def test_m_location_degenerate_and_nonconvergence():
    with pytest.raises(DegenerateScaleError):
        m_location([1.0, 1.0, 1.0, 5.0])
    rng = np.random.default_rng(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m_location(rng.standard_t(1, 200), max_iter=1)
    assert any(issubclass(w.category, NonConvergenceWarning) for w in caught)


def test_psi_spec_validation():
    with pytest.raises(InputError):
        PsiSpec("huber", 0.0)
    with pytest.raises(InputError):
        PsiSpec("cauchy", 1.0)


# -- scores -------------------------------------------------------------------

def test_z_scores(clean, contaminated):
    rep = z_scores(contaminated)
    np.testing.assert_allclose(rep.scores, [-0.45, -0.45, -0.45, 1.79, -0.45], atol=0.01)
    assert not rep.flagged.any()
    assert np.abs(z_scores(clean).scores).max() == pytest.approx(1.41, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=2, max_size=40).filter(lambda v: np.std(v) > 1e-6))
def test_z_scores_center(values):
    assert abs(z_scores(values).scores.mean()) < 1e-12 * max(1.0, len(values))


def test_robust_scores(contaminated):
    rep = robust_scores(contaminated)
    np.testing.assert_allclose(rep.scores[[0, 1, 2, 4]], [-0.22, 1.35, -0.67, 0.0], atol=0.01)
    assert rep.scores[3] == pytest.approx(1277.5, abs=1)
    assert rep.flagged.tolist() == [False, False, False, True, False]
    assert rep.cutoff == 2.5


def test_robust_scores_zero_mad_lists_ties():
    with pytest.raises(DegenerateScaleError) as err:
        robust_scores([0, 0, 0, 0, 9])
    assert err.value.tied_values == (0.0,)


def test_robust_scores_affine_invariant(contaminated):
    a = robust_scores(contaminated).scores
    b = robust_scores(3.0 * contaminated - 7.0).scores
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


def test_robust_scores_qn_option(contaminated):
    rep = robust_scores(contaminated, scale="qn")
    assert rep.scale == pytest.approx(qn(contaminated))
    with pytest.raises(InputError):
        robust_scores(contaminated, scale="sd")


# -- properties ---------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=4, max_size=30), st.floats(0.01, 100), finite)
def test_affine_equivariance(values, a, b):
    x = np.array(values)
    y = a * x + b
    tol = 1e-10 * (1 + np.abs(y).max())
    assert abs(median(y) - (a * median(x) + b)) <= tol
    assert abs(mad(y) - a * mad(x)) <= tol
    assert abs(qn(y) - a * qn(x)) <= tol
    assert abs(iqr_normalized(y) - a * iqr_normalized(x)) <= tol
    if qn(x) > 1e-6 * (1 + np.abs(x).max()):
        assert abs(m_location(y) - (a * m_location(x) + b)) <= 1e-6 * (1 + np.abs(y).max())


@pytest.mark.parametrize("which", ["first", "largest", "smallest"])
def test_breakdown(which):
    rng = np.random.default_rng(4)
    x = rng.normal(10, 1, 21)
    spread = x.max() - x.min()
    m = (x.size - 1) // 2
    idx = {"first": np.arange(m), "largest": np.argsort(x)[-m:], "smallest": np.argsort(x)[:m]}
    bad = x.copy()
    bad[idx[which]] = 1e6
    assert abs(median(bad) - median(x)) < spread
    # the unscaled median absolute deviation stays inside the clean range;
    # the 1.4826 factor stretches that bound by the same factor
    assert abs(mad(bad) - mad(x)) / 1.4826 < spread
    assert abs(mad(bad) - mad(x)) < 1.4826 * spread
    assert bad.mean() > 1e4 and bad.std(ddof=1) > 1e4


def test_gaussian_consistency():
    x = np.random.default_rng(2024).standard_normal(100_000)
    for est in (mad, qn, iqr_normalized):
        assert 0.97 <= est(x) <= 1.03


def test_standardizer_degenerate_columns():
    X = np.c_[CONTAMINATED, np.ones(5)]
    std = RobustStandardizer().fit(X)
    assert std.degenerate_.tolist() == [False, True]
    Z = std.transform(X)
    assert np.all(Z[:, 1] == 0.0)
    np.testing.assert_allclose(Z[:, 0], robust_scores(CONTAMINATED).scores)
    assert RobustStandardizer(scale="qn").get_params() == {"scale": "qn"}


def test_clean_has_no_flags():
    assert not robust_scores(CLEAN).flagged.any()
