"""Command-line front end.

Every subcommand reads a CSV/TSV file, writes ``<cmd>_report.csv``, the
numeric content of each plot as CSV, the SVG plots and a JSON run manifest
into ``--out-dir``. Exit codes: 0 success, 2 input error, 3 numeric
degeneracy (exact fit, singular or zero scale), 4 non-convergence.
"""

import argparse
import csv
from dataclasses import dataclass, field
import hashlib
import io
import json
import os
import platform
import sys
import time
import warnings

import numpy as np

from . import __version__
from .cellwise import block_aggregate, flag_cells, rowmap, rowwise_flags
from .covariance import (
    classical_moments,
    dd_plot_data,
    fast_mcd,
    mahalanobis_distances,
    mrcd,
    stahel_donoho,
    tolerance_ellipse,
)
from .distributions import chi2_cutoff
from .exceptions import (
    DegenerateScaleError,
    ExactFitError,
    InputError,
    NonConvergenceWarning,
    SingularMatrixError,
)
from .models import classify, train_discriminant, trimmed_kmeans
from .pca import classical_pca, pca_distances, robust_pca, spherical_pca
from .regression import fast_lts, ls_fit, regression_outlier_map, reweighted_ls
from .svg import grid_plot, scatter_plot
from .univariate import (
    PsiSpec,
    boxplot_fences,
    iqr_normalized,
    m_location,
    mad,
    median,
    qn,
    robust_scores,
    z_scores,
)

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NONCONVERGENCE = 0, 2, 3, 4
SUBCOMMANDS = ("univariate", "mcd", "mrcd", "sdoutl", "lts", "pca", "lda", "qda",
               "tkmeans", "cellmap")


@dataclass
class Dataset:
    path: str
    header: bool
    columns: list
    X: np.ndarray
    y: np.ndarray = None
    response: str = None
    labels: np.ndarray = None
    label_column: str = None
    sha256: str = ""


def _parse_float(token):
    try:
        v = float(token)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def _select(names, spec, what):
    if spec is None:
        return None
    if spec in names:
        return names.index(spec)
    try:
        idx = int(spec) - 1
    except ValueError:
        raise InputError(f"{what} column {spec!r} not found; columns are {names}") from None
    if not 0 <= idx < len(names):
        raise InputError(f"{what} column index {spec} out of range 1..{len(names)}")
    return idx


def ingest(path, header=None, columns=None, response=None, labels=None):
    """Read a comma- or tab-separated numeric table.

    ``header=None`` treats the first row as a header when any of its cells
    is non-numeric. ``columns`` (names or 1-based indices) restricts the
    predictor columns; ``response`` and ``labels`` name the response and
    group-label columns, which are excluded from the predictors.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from None
    text = raw.decode("utf-8-sig")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{path} is empty")
    delim = "\t" if "\t" in lines[0] else ","
    rows = [[c.strip() for c in r] for r in csv.reader(lines, delimiter=delim)]
    width = len(rows[0])
    if header is None:
        header = any(_parse_float(c) is None for c in rows[0])
    if header:
        names, body, first = rows[0], rows[1:], 2
    else:
        names, body, first = [f"x{j + 1}" for j in range(width)], rows, 1
    if not body:
        raise InputError(f"{path} has no data rows")
    for i, r in enumerate(body):
        if len(r) != width:
            raise InputError(f"row {i + first} has {len(r)} fields, expected {width}")

    resp_idx = _select(names, response, "response")
    lab_idx = _select(names, labels, "label")
    if columns:
        wanted = [_select(names, c, "selected") for c in columns]
    else:
        wanted = [j for j in range(width) if j not in (resp_idx, lab_idx)]
    if not wanted:
        raise InputError("no predictor columns selected")

    numeric = list(wanted) + ([resp_idx] if resp_idx is not None else [])
    values = np.empty((len(body), len(numeric)))
    for i, r in enumerate(body):
        for k, j in enumerate(numeric):
            v = _parse_float(r[j])
            if v is None:
                raise InputError(
                    f"non-numeric cell at row {i + first}, column {j + 1} ({names[j]}): {r[j]!r}"
                )
            values[i, k] = v
    return Dataset(
        path=str(path),
        header=bool(header),
        columns=[names[j] for j in wanted],
        X=values[:, :len(wanted)],
        y=values[:, -1] if resp_idx is not None else None,
        response=names[resp_idx] if resp_idx is not None else None,
        labels=np.array([r[lab_idx] for r in body]) if lab_idx is not None else None,
        label_column=names[lab_idx] if lab_idx is not None else None,
        sha256=hashlib.sha256(raw).hexdigest(),
    )


# -- output ------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


@dataclass
class RunResult:
    files: dict = field(default_factory=dict)  # name -> text
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK


def _h_arg(cfg, n):
    if cfg.h is not None and cfg.h_frac is not None:
        raise InputError("give either --h or --h-frac, not both")
    if cfg.h is not None:
        return cfg.h
    if cfg.h_frac is not None:
        if not 0 < cfg.h_frac <= 1:
            raise InputError("--h-frac must lie in (0, 1]")
        return int(np.floor(cfg.h_frac * n))
    return None


def _index_plot(values, cutoff, title, ylabel, flags):
    idx = np.arange(1, len(values) + 1)
    return scatter_plot(idx, values, title=title, xlabel="index", ylabel=ylabel,
                        flags=flags, labels=idx, hlines=[cutoff])


# -- subcommands -------------------------------------------------------------


def run_univariate(ds, cfg):
    cutoff = cfg.cutoff if cfg.cutoff is not None else 2.5
    res = RunResult()
    rows, summary = [], []
    for j, name in enumerate(ds.columns):
        x = ds.X[:, j]
        rob = robust_scores(x, cutoff)
        z = z_scores(x, cutoff)
        lo, hi = boxplot_fences(x) if x.size >= 4 else (float("nan"), float("nan"))
        for i, v in enumerate(x):
            rows.append([name, i + 1, v, z.scores[i], rob.scores[i], bool(z.flagged[i]),
                         bool(rob.flagged[i]), bool(v < lo or v > hi)])
        summary.append([
            name, x.size, x.mean(), x.std(ddof=1), median(x), mad(x), qn(x),
            iqr_normalized(x) if x.size >= 4 else float("nan"),
            m_location(x, PsiSpec.huber()), lo, hi, int(rob.flagged.sum()),
        ])
        res.files[f"univariate_scores_{j + 1}.svg"] = _index_plot(
            rob.scores, cutoff, f"Robust scores: {name}", "(x - median) / MAD", rob.flagged)
        res.files[f"univariate_scores_{j + 1}.csv"] = table_csv(
            ["index", "robust_score", "cutoff"],
            [[i + 1, s, cutoff] for i, s in enumerate(rob.scores)])
    res.files["univariate_report.csv"] = table_csv(
        ["column", "row", "value", "z_score", "robust_score", "z_flag", "robust_flag",
         "outside_fence"], rows)
    res.files["univariate_summary.csv"] = table_csv(
        ["column", "n", "mean", "stdev", "median", "mad", "qn", "iqr_normalized",
         "m_huber", "fence_lower", "fence_upper", "n_flagged"], summary)
    res.summary["n_flagged"] = int(sum(r[-1] for r in summary))
    return res


def _check_mcd_dims(ds):
    n, d = ds.X.shape
    if n <= d:
        raise InputError(f"mcd needs more rows than columns (n={n}, d={d}); use mrcd")


def run_mcd(ds, cfg):
    _check_mcd_dims(ds)
    X = ds.X
    n, d = X.shape
    level = 0.975
    rob = fast_mcd(X, _h_arg(cfg, n), cfg.starts, cfg.seed, not cfg.no_reweight, level)
    res = RunResult()
    res.summary.update(h=rob.h, objective=rob.objective, exact_fit=rob.exact_fit,
                       consistency_factor=rob.consistency_factor, reweighted=rob.reweighted)
    if rob.exact_fit:
        normal, offset = rob.hyperplane
        res.summary["hyperplane"] = {"normal": normal.tolist(), "offset": offset}
        res.files["mcd_report.csv"] = table_csv(
            ["row", "on_hyperplane"], [[i + 1, bool(w)] for i, w in enumerate(rob.weights)])
        res.exit_code = EXIT_DEGENERATE
        return res
    cla = classical_moments(X)
    dd = dd_plot_data(X, cla, rob, level)
    if cfg.cutoff is not None:
        dd.cutoff = cfg.cutoff
        dd.__post_init__()
    res.files["mcd_report.csv"] = table_csv(
        ["row", "md", "rd", "md_flag", "rd_flag"],
        [[i + 1, dd.md[i], dd.rd[i], dd.md_flags[i], dd.flags[i]] for i in range(n)])
    res.files["mcd_estimates.csv"] = table_csv(
        ["estimate", "variable", "location"] + [f"scatter_{c}" for c in ds.columns],
        [["robust", c, rob.mu[j]] + list(rob.sigma[j]) for j, c in enumerate(ds.columns)]
        + [["classical", c, cla.mu[j]] + list(cla.sigma[j]) for j, c in enumerate(ds.columns)])
    res.files["mcd_ddplot.csv"] = table_csv(
        ["row", "md", "rd", "cutoff"], [[i + 1, dd.md[i], dd.rd[i], dd.cutoff] for i in range(n)])
    res.files["mcd_ddplot.svg"] = scatter_plot(
        dd.md, dd.rd, title="DD-plot", xlabel="Mahalanobis distance",
        ylabel="Robust distance", flags=dd.flags, labels=np.arange(1, n + 1),
        hlines=[dd.cutoff], vlines=[dd.cutoff], identity=True)
    res.summary["n_flagged"] = int(dd.flags.sum())
    if d == 2:
        e_rob = tolerance_ellipse(rob, level)
        e_cla = tolerance_ellipse(cla, level)
        res.files["mcd_ellipse.csv"] = table_csv(
            ["estimate", "vertex", "x", "y"],
            [["robust", k, a, b] for k, (a, b) in enumerate(e_rob)]
            + [["classical", k, a, b] for k, (a, b) in enumerate(e_cla)])
        res.files["mcd_ellipse.svg"] = scatter_plot(
            X[:, 0], X[:, 1], title="97.5% tolerance ellipses (classical red, robust blue)",
            xlabel=ds.columns[0], ylabel=ds.columns[1], flags=dd.flags,
            labels=np.arange(1, n + 1), polylines=[(e_cla, "red"), (e_rob, "blue")])
    return res


def run_mrcd(ds, cfg):
    X = ds.X
    n, d = X.shape
    target = "identity"
    if cfg.target is not None and cfg.target != "identity":
        target = ("equicorrelation", float(cfg.target))
    ls = mrcd(X, _h_arg(cfg, n), cfg.rho, target, cfg.starts, cfg.seed)
    rd = mahalanobis_distances(X, ls)
    cutoff = cfg.cutoff if cfg.cutoff is not None else chi2_cutoff(d)
    flags = rd > cutoff
    res = RunResult(summary={"h": ls.h, "rho": ls.extra["rho"], "objective": ls.objective,
                             "n_flagged": int(flags.sum())})
    res.files["mrcd_report.csv"] = table_csv(
        ["row", "rd", "flag"], [[i + 1, rd[i], flags[i]] for i in range(n)])
    res.files["mrcd_distances.csv"] = table_csv(
        ["index", "rd", "cutoff"], [[i + 1, rd[i], cutoff] for i in range(n)])
    res.files["mrcd_distances.svg"] = _index_plot(rd, cutoff, "MRCD robust distances",
                                                  "robust distance", flags)
    return res


def run_sdoutl(ds, cfg):
    X = ds.X
    n, d = X.shape
    rep = stahel_donoho(X, cfg.n_dirs, cfg.seed)
    cutoff = cfg.cutoff if cfg.cutoff is not None else chi2_cutoff(d)
    flags = rep.outl > cutoff
    res = RunResult(summary={"directions_used": rep.directions_used,
                             "directions_skipped": rep.directions_skipped,
                             "n_flagged": int(flags.sum())})
    res.files["sdoutl_report.csv"] = table_csv(
        ["row", "outlyingness", "flag"], [[i + 1, rep.outl[i], flags[i]] for i in range(n)])
    res.files["sdoutl_index.csv"] = table_csv(
        ["index", "outlyingness", "cutoff"], [[i + 1, rep.outl[i], cutoff] for i in range(n)])
    res.files["sdoutl_index.svg"] = _index_plot(rep.outl, cutoff, "Stahel-Donoho outlyingness",
                                                "outlyingness", flags)
    return res


def run_lts(ds, cfg):
    if ds.y is None:
        raise InputError("lts needs --response")
    X, y = ds.X, ds.y
    n, d = X.shape
    if n <= d + 1:
        raise InputError(f"lts needs n > d + 1 (n={n}, d={d})")
    cutoff = cfg.cutoff if cfg.cutoff is not None else 2.5
    raw = fast_lts(X, y, _h_arg(cfg, n), cfg.starts, cfg.seed)
    res = RunResult()
    res.summary.update(h=raw.h, objective=raw.objective, sigma_lts=raw.sigma,
                       exact_fit=raw.exact_fit)
    beta_ls = ls_fit(X, y)
    terms = ["intercept"] + ds.columns
    if raw.exact_fit:
        res.files["lts_coefficients.csv"] = table_csv(
            ["term", "ls", "lts"], [[t, beta_ls[j], raw.beta[j]] for j, t in enumerate(terms)])
        res.exit_code = EXIT_DEGENERATE
        return res
    final = reweighted_ls(raw, X, y, cutoff) if not cfg.no_reweight else raw
    omap = regression_outlier_map(raw, X, seed=cfg.seed, resid_cutoff=cutoff)
    inf = final.inference
    coef_rows = []
    for j, t in enumerate(terms):
        row = [t, beta_ls[j], raw.beta[j], final.beta[j]]
        row += [inf["se"][j], inf["t"][j], inf["p_values"][j]] if inf else ["", "", ""]
        coef_rows.append(row)
    res.files["lts_coefficients.csv"] = table_csv(
        ["term", "ls", "lts_raw", "final", "se", "t", "p_value"], coef_rows)
    fitted = y - raw.residuals
    res.files["lts_report.csv"] = table_csv(
        ["row", "y", "fitted", "residual", "std_residual", "rd_x", "weight", "class"],
        [[i + 1, y[i], fitted[i], raw.residuals[i], omap.std_resid[i], omap.rd_x[i],
          final.weights[i], omap.classes[i]] for i in range(n)])
    res.files["lts_outlier_map.csv"] = table_csv(
        ["row", "rd_x", "std_residual", "rd_cutoff", "resid_cutoff"],
        [[i + 1, omap.rd_x[i], omap.std_resid[i], omap.rd_cutoff, cutoff] for i in range(n)])
    res.files["lts_outlier_map.svg"] = scatter_plot(
        omap.rd_x, omap.std_resid, title="Regression outlier map",
        xlabel="Robust distance of x", ylabel="Standardized LTS residual",
        flags=omap.classes != "regular", labels=np.arange(1, n + 1),
        hlines=[-cutoff, cutoff], vlines=[omap.rd_cutoff])
    if d == 1:
        res.files["lts_fit.csv"] = table_csv(
            ["line", "intercept", "slope"],
            [["ls", beta_ls[0], beta_ls[1]], ["lts", final.beta[0], final.beta[1]]])
        res.files["lts_fit.svg"] = scatter_plot(
            X[:, 0], y, title="LS (red) and LTS (blue) fits", xlabel=ds.columns[0],
            ylabel=ds.response, flags=omap.classes != "regular", labels=np.arange(1, n + 1),
            lines=[(beta_ls[0], beta_ls[1], "red"), (final.beta[0], final.beta[1], "blue")])
    res.summary["classes"] = {c: int((omap.classes == c).sum()) for c in
                              ("regular", "vertical", "good_leverage", "bad_leverage")}
    if inf:
        res.summary["r2"] = inf["r2"]
    return res


def run_pca(ds, cfg):
    X = ds.X
    n, d = X.shape
    k = cfg.k if cfg.k is not None else min(2, d)
    method = cfg.method or "robpca"
    if method == "robpca":
        model = robust_pca(X, k, _h_arg(cfg, n), cfg.n_dirs, cfg.seed)
    elif method == "spherical":
        model = spherical_pca(X, k)
    elif method == "classical":
        model = classical_pca(X, k)
    else:
        raise InputError(f"unknown pca method {method!r}")
    omap = pca_distances(model, X)
    res = RunResult(summary={"k": k, "method": method, "eigenvalues": model.eigenvalues.tolist(),
                             "od_cutoff": omap.od_cutoff, "sd_cutoff": omap.sd_cutoff})
    res.files["pca_report.csv"] = table_csv(
        ["row", "od", "sd", "class"],
        [[i + 1, omap.od[i], omap.sd[i], omap.classes[i]] for i in range(n)])
    res.files["pca_loadings.csv"] = table_csv(
        ["variable"] + [f"pc{j + 1}" for j in range(k)],
        [[c] + list(model.loadings[i]) for i, c in enumerate(ds.columns)])
    scree = model.extra.get("scree", model.eigenvalues)
    res.files["pca_scree.csv"] = table_csv(
        ["component", "eigenvalue"], [[j + 1, v] for j, v in enumerate(scree)])
    res.files["pca_scree.svg"] = scatter_plot(
        np.arange(1, len(scree) + 1), scree, title="Scree plot", xlabel="component",
        ylabel="eigenvalue", polylines=[(np.c_[np.arange(1, len(scree) + 1), scree], "black")])
    res.files["pca_outlier_map.csv"] = table_csv(
        ["row", "sd", "od", "sd_cutoff", "od_cutoff"],
        [[i + 1, omap.sd[i], omap.od[i], omap.sd_cutoff, omap.od_cutoff] for i in range(n)])
    res.files["pca_outlier_map.svg"] = scatter_plot(
        omap.sd, omap.od, title="PCA outlier map", xlabel="Score distance",
        ylabel="Orthogonal distance", flags=omap.classes != "regular",
        labels=np.arange(1, n + 1), hlines=[omap.od_cutoff], vlines=[omap.sd_cutoff])
    res.summary["classes"] = {c: int((omap.classes == c).sum()) for c in
                              ("regular", "good_leverage", "orthogonal", "bad_leverage")}
    return res


def _run_discriminant(ds, cfg, kind):
    if ds.labels is None:
        raise InputError(f"{kind} needs --labels")
    estimator = cfg.method or "mcd"
    model = train_discriminant(ds.X, ds.labels, kind, estimator, cfg.h_frac, seed=cfg.seed)
    out = classify(model, ds.X)
    groups = [str(g) for g in model.classes]
    res = RunResult(summary={"groups": groups, "estimator": estimator,
                             "training_accuracy": float(np.mean(out.labels == ds.labels))})
    res.files[f"{kind}_report.csv"] = table_csv(
        ["row", "label", "predicted", "tie"] + [f"score_{g}" for g in groups],
        [[i + 1, ds.labels[i], out.labels[i], out.ties[i]] + list(out.scores[i])
         for i in range(ds.X.shape[0])])
    res.files[f"{kind}_model.csv"] = table_csv(
        ["group", "prior"] + [f"mu_{c}" for c in ds.columns],
        [[g, model.priors[j]] + list(model.mus[j]) for j, g in enumerate(groups)])
    return res


def run_lda(ds, cfg):
    return _run_discriminant(ds, cfg, "lda")


def run_qda(ds, cfg):
    return _run_discriminant(ds, cfg, "qda")


def run_tkmeans(ds, cfg):
    X = ds.X
    n, d = X.shape
    k = cfg.k if cfg.k is not None else 2
    r = trimmed_kmeans(X, k, _h_arg(cfg, n), min(cfg.starts, 100), cfg.seed)
    res = RunResult(summary={"k": k, "h": r.h, "objective": r.objective,
                             "n_unassigned": int((r.assignment < 0).sum())})
    res.files["tkmeans_report.csv"] = table_csv(
        ["row", "cluster"], [[i + 1, int(a) + 1 if a >= 0 else 0] for i, a in enumerate(r.assignment)])
    res.files["tkmeans_centers.csv"] = table_csv(
        ["cluster"] + ds.columns, [[j + 1] + list(c) for j, c in enumerate(r.centers)])
    if d >= 2:
        res.files["tkmeans_scatter.csv"] = table_csv(
            ["row", ds.columns[0], ds.columns[1], "cluster"],
            [[i + 1, X[i, 0], X[i, 1], int(r.assignment[i]) + 1] for i in range(n)])
        res.files["tkmeans_scatter.svg"] = scatter_plot(
            X[:, 0], X[:, 1], title="Trimmed k-means (trimmed rows in red)",
            xlabel=ds.columns[0], ylabel=ds.columns[1], flags=r.assignment < 0)
    return res


def run_cellmap(ds, cfg):
    X = ds.X
    n, d = X.shape
    cutoff = cfg.cutoff if cfg.cutoff is not None else 2.5
    cf = flag_cells(X, cutoff, cfg.scale or "mad")
    bs = cfg.block_size
    grid = block_aggregate(cf, bs, bs)
    method = cfg.method or ("fast_mcd" if n > 5 * d else "robust_pca")
    rows = rowwise_flags(X, method, k=cfg.k, seed=cfg.seed, n_starts=cfg.starts)
    rgrid = rowmap(rows, bs)
    res = RunResult(summary={
        "n_high": int((cf.signed == 1).sum()), "n_low": int((cf.signed == -1).sum()),
        "degenerate_columns": [ds.columns[j] for j in np.flatnonzero(cf.degenerate)],
        "rows_flagged": int(rows.sum()), "row_method": method,
        "rows_with_flagged_cell": int((cf.signed != 0).any(axis=1).sum()),
    })
    names = {1: "high", 0: "ok", -1: "low"}
    res.files["cellmap_report.csv"] = table_csv(
        ["row", "column", "value", "score", "flag"],
        [[i + 1, ds.columns[j], X[i, j], cf.resid[i, j], names[int(cf.signed[i, j])]]
         for i in range(n) for j in range(d)])
    res.files["cellmap_rows.csv"] = table_csv(
        ["row", "flagged"], [[i + 1, bool(f)] for i, f in enumerate(rows)])
    res.files["cellmap_blocks.csv"] = table_csv(
        ["block_row", "block_col", "rows", "cols", "intensity"],
        [[bi + 1, bj + 1, grid.row_ticks[bi], grid.col_ticks[bj], grid.cells[bi, bj]]
         for bi in range(grid.cells.shape[0]) for bj in range(grid.cells.shape[1])])
    res.files["cellmap_rowmap.csv"] = table_csv(
        ["block_row", "rows", "intensity"],
        [[bi + 1, rgrid.row_ticks[bi], rgrid.cells[bi, 0]] for bi in range(rgrid.cells.shape[0])])
    res.files["cellmap.svg"] = grid_plot(grid, title=f"Cell map ({bs}x{bs} blocks)")
    res.files["cellmap_rowmap.svg"] = grid_plot(rgrid, title="Outlying rows", kind="rowmap")
    return res


RUNNERS = {
    "univariate": run_univariate, "mcd": run_mcd, "mrcd": run_mrcd, "sdoutl": run_sdoutl,
    "lts": run_lts, "pca": run_pca, "lda": run_lda, "qda": run_qda,
    "tkmeans": run_tkmeans, "cellmap": run_cellmap,
}


# -- driver ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="CSV or TSV file")
    common.add_argument("--columns", help="comma-separated predictor columns (names or 1-based)")
    hdr = common.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_true", default=None)
    hdr.add_argument("--no-header", dest="header", action="store_false")
    common.add_argument("--response", help="response column (lts)")
    common.add_argument("--labels", help="group label column (lda, qda)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--h", type=int, default=None, help="subset size")
    common.add_argument("--h-frac", type=float, default=None, help="subset size as fraction of n")
    common.add_argument("--starts", type=int, default=500, help="random starts")
    common.add_argument("--cutoff", type=float, default=None)
    common.add_argument("--k", type=int, default=None, help="components or clusters")
    common.add_argument("--out-dir", default="robust_out")
    common.add_argument("--no-reweight", action="store_true")
    common.add_argument("--rho", type=float, default=None, help="MRCD regularization")
    common.add_argument("--target", default=None,
                        help="MRCD target: identity or an equicorrelation value c")
    common.add_argument("--block-size", type=int, default=5)
    common.add_argument("--method", default=None,
                        help="pca: robpca|spherical|classical; lda/qda: mcd|classical; "
                             "cellmap rows: fast_mcd|robust_pca")
    common.add_argument("--scale", default=None, help="cellmap scale: mad|qn")
    common.add_argument("--n-dirs", type=int, default=500, help="projection directions")

    parser = argparse.ArgumentParser(
        prog="robust-anomaly", description="Robust estimators and outlier diagnostics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} analysis")
    return parser


def _config_dict(args):
    keys = ("seed", "h", "h_frac", "starts", "cutoff", "k", "response", "labels", "columns",
            "header", "no_reweight", "rho", "target", "block_size", "method", "scale", "n_dirs")
    return {k: getattr(args, k) for k in keys}


def _versions():
    import scipy
    import sklearn

    return {"robust_anomaly": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "sklearn": sklearn.__version__}


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def run(command, args):
    """Run one subcommand; returns (exit_code, manifest)."""
    timings = {}
    manifest = {"subcommand": command, "config": _config_dict(args), "seed": args.seed,
                "versions": _versions()}
    code = EXIT_OK
    t0 = time.perf_counter()
    try:
        if args.block_size < 1:
            raise InputError("--block-size must be at least 1")
        if command == "lts" and args.response is None:
            raise InputError("lts needs --response")
        if command in ("lda", "qda") and args.labels is None:
            raise InputError(f"{command} needs --labels")
        cols = args.columns.split(",") if args.columns else None
        ds = ingest(args.input, args.header, cols, args.response, args.labels)
        manifest["input"] = {"path": ds.path, "sha256": ds.sha256, "n_rows": ds.X.shape[0],
                             "n_cols": ds.X.shape[1], "columns": ds.columns,
                             "response": ds.response, "labels": ds.label_column}
        timings["ingest_s"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonConvergenceWarning)
            result = RUNNERS[command](ds, args)
        timings["compute_s"] = time.perf_counter() - t1
        code = result.exit_code
        if any(issubclass(w.category, NonConvergenceWarning) for w in caught):
            code = max(code, EXIT_NONCONVERGENCE)
            manifest["warnings"] = [str(w.message) for w in caught]
        manifest["summary"] = result.summary
        os.makedirs(args.out_dir, exist_ok=True)
        t2 = time.perf_counter()
        for name in sorted(result.files):
            with open(os.path.join(args.out_dir, name), "w", newline="") as fh:
                fh.write(result.files[name])
        timings["write_s"] = time.perf_counter() - t2
        manifest["outputs"] = sorted(result.files)
    except InputError as err:
        code, manifest["error"] = EXIT_INPUT, str(err)
    except (ExactFitError, SingularMatrixError, DegenerateScaleError) as err:
        code, manifest["error"] = EXIT_DEGENERATE, f"{type(err).__name__}: {err}"
    manifest["timings"] = timings
    manifest["exit_code"] = code
    if os.path.isdir(args.out_dir) or code == EXIT_OK:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, f"{command}_manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return code, manifest


def main(argv=None):
    args = build_parser().parse_args(argv)
    code, manifest = run(args.command, args)
    if "error" in manifest:
        print(f"robust-anomaly {args.command}: {manifest['error']}", file=sys.stderr)
    else:
        print(json.dumps(manifest.get("summary", {}), sort_keys=True, default=_json_default))
        if code != EXIT_OK:
            print(f"robust-anomaly {args.command}: finished with exit code {code}; "
                  f"see {args.command}_manifest.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
