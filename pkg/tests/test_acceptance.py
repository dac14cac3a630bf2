"""Exit criteria of the package, one test per criterion.

Each test prints a single PASS/FAIL line (visible even when pytest captures
output) and then asserts the same condition.
"""

import math
import time

import numpy as np
import pytest

from fixtures import (
    CLEAN,
    CONTAMINATED,
    PCA_SPECIAL_CLASSES,
    PLANE,
    leverage_fixture,
    lts_oracle,
    masking_fixture,
    mcd_oracle,
    mrcd_oracle,
    plane_fixture,
    random_fixtures,
)
from robust_anomaly import (
    DiscriminantModel,
    block_aggregate,
    c_step,
    chi2_ppf,
    classical_moments,
    classical_pca,
    classify,
    concentration_step,
    contaminate_cells,
    dd_plot_data,
    exhaustive_lts,
    exhaustive_mcd,
    fast_lts,
    fast_mcd,
    flag_cells,
    ls_fit,
    lts_c_step,
    lts_objective,
    mad,
    median,
    mrcd,
    pca_distances,
    principal_angle,
    regression_outlier_map,
    reweighted_ls,
    robust_pca,
    robust_scores,
    subset_determinant,
    z_scores,
)
from robust_anomaly import cli
from robust_anomaly.regression import design_matrix

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return _report


def test_criterion_1_univariate_golden_numbers(report):
    t0 = time.perf_counter()
    checks = {
        "mean": abs(CONTAMINATED.mean() - 17.65) < 0.005,
        "median": median(CONTAMINATED) == pytest.approx(6.28, abs=1e-12),
        "s(1)": abs(CLEAN.std(ddof=1) - 0.035) <= 0.001,
        "s(2)": abs(CONTAMINATED.std(ddof=1) - 25.41) <= 0.01,
        "mad": abs(mad(CLEAN) - 0.044) <= 0.001,
    }
    z2 = z_scores(CONTAMINATED)
    checks["z(2)"] = np.allclose(z2.scores, [-0.45, -0.45, -0.45, 1.79, -0.45], atol=0.01)
    checks["z(2) unflagged"] = not z2.flagged.any()
    checks["max|z(1)|"] = abs(np.abs(z_scores(CLEAN).scores).max() - 1.41) <= 0.005
    rob = robust_scores(CONTAMINATED)
    checks["robust(2)"] = (np.allclose(rob.scores[[0, 1, 2, 4]], [-0.22, 1.35, -0.67, 0.0],
                                       atol=0.01)
                           and abs(rob.scores[3] - 1277.5) <= 1)
    checks["flags"] = rob.flagged.tolist() == [False, False, False, True, False]
    elapsed = time.perf_counter() - t0
    checks["time < 1 s"] = elapsed < 1
    bad = [k for k, v in checks.items() if not v]
    report(1, not bad, f"univariate golden numbers ({len(checks)} checks, {elapsed:.3f} s)"
           + (f"; failed {bad}" if bad else ""))


def test_criterion_2_oracle_equivalence(report):
    t0 = time.perf_counter()
    misses, count = [], 0
    for f, (X, h) in enumerate(random_fixtures(20, seed=2024)):
        det, _ = mcd_oracle(X, h)
        got = fast_mcd(X, h, n_starts=500, seed=f, reweight=False).objective
        count += 1
        if not got <= det * (1 + 1e-9) + 1e-15:
            misses.append(("mcd", f, got, det))
    rng = np.random.default_rng(7)
    for f, (X, h) in enumerate(random_fixtures(20, seed=2025, d_range=(1, 3))):
        y = X @ rng.normal(size=X.shape[1]) + rng.standard_t(2, X.shape[0])
        h = max(h, X.shape[1] + 2)
        rss, _ = lts_oracle(X, y, h)
        got = fast_lts(X, y, h=h, n_starts=500, seed=f).objective
        count += 1
        if not got <= rss * (1 + 1e-9) + 1e-15:
            misses.append(("lts", f, got, rss))
    X = np.random.default_rng(10).standard_t(3, size=(10, 2))
    best = mrcd_oracle(X, 6, 0.1)
    got = mrcd(X, h=6, rho=0.1, n_starts=500, seed=0).objective
    count += 1
    if abs(got - best) > 1e-9 * best:
        misses.append(("mrcd", 0, got, best))
    elapsed = time.perf_counter() - t0
    ok = not misses and elapsed < 60
    report(2, ok, f"{count} fixtures (20 MCD, 20 LTS, 1 MRCD) vs exhaustive search, "
           f"{len(misses)} misses, {elapsed:.1f} s")


def test_criterion_3_monotone_concentration(report):
    rng = np.random.default_rng(3)
    violations = {"mcd": 0, "lts": 0, "tkmeans": 0}
    steps = dict.fromkeys(violations, 0)
    while steps["mcd"] < 1000:
        n, d = int(rng.integers(12, 40)), int(rng.integers(1, 4))
        X = rng.standard_t(3, size=(n, d))
        h = int(rng.integers(d + 2, n))
        sub = rng.choice(n, h, replace=False)
        for _ in range(5):
            new = c_step(X, sub)
            steps["mcd"] += 1
            violations["mcd"] += subset_determinant(X, new) > subset_determinant(X, sub) * (1 + 1e-12)
            sub = new
    while steps["lts"] < 1000:
        n, d = int(rng.integers(12, 40)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + rng.standard_t(1, n)
        A = design_matrix(X)
        h = int(rng.integers(d + 2, n))
        beta = rng.normal(size=d + 1) * 3
        for _ in range(5):
            new, _ = lts_c_step(A, y, beta, h)
            steps["lts"] += 1
            violations["lts"] += lts_objective(A, y, new, h) > lts_objective(A, y, beta, h) * (1 + 1e-12)
            beta = new
    while steps["tkmeans"] < 1000:
        n, k = int(rng.integers(15, 50)), int(rng.integers(1, 4))
        X = rng.standard_t(3, size=(n, 2))
        h = int(rng.integers(3 * k, n))
        centers = X[rng.choice(n, k, replace=False)]
        for _ in range(5):
            d2 = ((X[:, None] - centers[None]) ** 2).sum(2).min(axis=1)
            before = np.sort(d2)[:h].sum()
            centers, _, obj = concentration_step(X, centers, h)
            if math.isnan(obj):
                break
            steps["tkmeans"] += 1
            violations["tkmeans"] += bool(obj > before * (1 + 1e-12) + 1e-12)
    total = sum(violations.values())
    report(3, total == 0, f"concentration steps {steps}, violations {violations}")


def test_criterion_4_equivariance(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    subsets_equal = True
    for X, h in random_fixtures(8, seed=44, n_range=(7, 11), d_range=(1, 3)):
        d = X.shape[1]
        A = rng.normal(size=(d, d)) + 2 * np.eye(d)
        b = rng.normal(size=d)
        a, t = exhaustive_mcd(X, h), exhaustive_mcd(X @ A.T + b, h)
        subsets_equal &= a.best_subset.tolist() == t.best_subset.tolist()
        worst = max(worst, np.abs(t.mu - (A @ a.mu + b)).max(),
                    np.abs(t.sigma - A @ a.sigma @ A.T).max())
    for _ in range(8):
        n = int(rng.integers(8, 11))
        X = rng.normal(size=(n, 2))
        y = X @ [1.0, -0.5] + rng.standard_t(2, n)
        h = 7
        base = exhaustive_lts(X, y, h).beta
        a, c = float(rng.uniform(0.5, 3)), rng.normal(size=3)
        moved = exhaustive_lts(X, a * y + design_matrix(X) @ c, h).beta
        worst = max(worst, np.abs(moved - (a * base + c)).max())
        M = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        mapped = exhaustive_lts(X @ M, y, h).beta
        worst = max(worst, np.abs(mapped[1:] - np.linalg.solve(M, base[1:])).max(),
                    abs(mapped[0] - base[0]))
    ok = subsets_equal and worst <= 1e-8
    report(4, ok, f"exhaustive MCD affine and LTS regression/affine equivariance, "
           f"max deviation {worst:.2e}")


def test_criterion_5_breakdown_and_masking(report):
    X, y, giants = leverage_fixture()
    ls_slope = ls_fit(X, y)[1]
    raw = fast_lts(X, y)
    rw = reweighted_ls(raw, X, y)
    classes = regression_outlier_map(raw, X).classes[giants]
    lev_ok = (ls_slope < 0 and raw.beta[1] > 0 and np.all(rw.weights[giants] == 0)
              and all(c == "bad_leverage" for c in classes))

    Z, out = masking_fixture()
    rob = fast_mcd(Z, h=(Z.shape[0] + 3) // 2, seed=0)
    dd = dd_plot_data(Z, classical_moments(Z), rob)
    cut = math.sqrt(chi2_ppf(0.975, 2))
    mask_ok = bool(np.all(dd.rd[out] > cut) and np.all(dd.md[out] < cut))
    report(5, lev_ok and mask_ok,
           f"LS slope {ls_slope:.3f}, LTS slope {raw.beta[1]:.3f}, giant classes "
           f"{sorted(set(classes))}; planted RD {np.round(dd.rd[out], 2).tolist()} "
           f"MD {np.round(dd.md[out], 2).tolist()} vs cutoff {cut:.3f}")


def test_criterion_6_pca(report):
    X, special = plane_fixture()
    model = robust_pca(X, 2)
    robust = principal_angle(model.loadings, PLANE)
    classical = principal_angle(classical_pca(X, 2).loadings, PLANE)
    classes = list(pca_distances(model, X).classes[special])
    ok = robust < 5 and classical > 20 and classes == PCA_SPECIAL_CLASSES
    report(6, ok, f"robust angle {robust:.2f} deg, classical angle {classical:.2f} deg, "
           f"special classes {'match' if classes == PCA_SPECIAL_CLASSES else classes}")


def test_criterion_7_qda_equals_lda_with_common_scatter(report):
    rng = np.random.default_rng(7)
    d, J = 3, 4
    B = rng.normal(size=(d, d))
    S = B @ B.T + np.eye(d)
    mus = rng.normal(0, 2, size=(J, d))
    priors = rng.dirichlet(np.ones(J))
    classes = np.arange(J)
    qda = DiscriminantModel(classes, mus, np.repeat(S[None], J, 0), priors, "qda", "classical")
    lda = DiscriminantModel(classes, mus, np.repeat(S[None], J, 0), priors, "lda", "classical", S)
    X = rng.normal(0, 3, size=(1000, d))
    mismatches = int((classify(qda, X).labels != classify(lda, X).labels).sum())
    report(7, mismatches == 0, f"QDA vs LDA argmax on 1000 points: {mismatches} mismatches")


def test_criterion_8_cellwise(report):
    X = np.random.default_rng(8).normal(size=(500, 20))
    Y, _ = contaminate_cells(X, 0.05, seed=8)
    share = float((flag_cells(Y).signed != 0).any(axis=1).mean())
    strip = np.array([1, 1, 0, 0, 0], float)[:, None]
    hand = [
        block_aggregate(np.ones((5, 5))).cells.tolist() == [[1.0]],
        abs(block_aggregate(strip, 5, 1).cells[0, 0] - 0.4) < 1e-12,
        block_aggregate(-np.ones((3, 3)), 5, 5).cells.tolist() == [[-1.0]],
        np.array_equal(block_aggregate(np.diag([1.0, -1.0]), 1, 1).cells, np.diag([1.0, -1.0])),
    ]
    ok = share > 0.5 and all(hand)
    report(8, ok, f"{100 * share:.1f}% of rows carry a flagged cell at 5% cell contamination; "
           f"block hand cases {sum(hand)}/{len(hand)} exact")


def test_criterion_9_cli_determinism(report, tmp_path):
    X = np.random.default_rng(9).standard_t(3, size=(40, 3))
    path = tmp_path / "data.csv"
    path.write_text("a,b,c\n" + "".join(",".join(repr(float(v)) for v in row) + "\n" for row in X))
    differing = []
    for cmd, extra in (("mcd", []), ("mrcd", []), ("sdoutl", []), ("pca", ["--k", "2"]),
                       ("tkmeans", ["--k", "2"]), ("cellmap", []), ("univariate", []),
                       ("lts", ["--columns", "a,b", "--response", "c"])):
        outs = []
        for run in ("first", "second"):
            out = tmp_path / f"{cmd}_{run}"
            cli.main([cmd, str(path), "--seed", "17", "--out-dir", str(out), *extra])
            outs.append({f.name: f.read_bytes() for f in out.iterdir() if f.suffix == ".csv"})
        if not outs[0] or outs[0] != outs[1]:
            differing.append(cmd)
    report(9, not differing, "repeated CLI runs with one seed give byte-identical CSVs"
           + (f"; differing: {differing}" if differing else " for 8 subcommands"))
