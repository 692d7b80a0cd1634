"""Collinearity pruning followed by univariate two-group F-tests."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .features import display_name
from .stats.special import f_sf


@dataclass(frozen=True)
class FTestResult:
    feature: str
    F: float
    p: float
    mean_good: float
    sd_good: float
    mean_poor: float
    sd_poor: float
    n_good: int
    n_poor: int


@dataclass
class SelectionReport:
    dropped_collinear: list = field(default_factory=list)  # (kept, dropped, r)
    dropped_constant: list = field(default_factory=list)
    f_results: list = field(default_factory=list)  # FTestResult, descending F
    kept: list = field(default_factory=list)


def pairwise_pearson(a, b):
    """Pearson r over rows where both columns are present (NaN if undefined)."""
    ok = np.isfinite(a) & np.isfinite(b)
    if ok.sum() < 3:
        return float("nan")
    x = a[ok] - a[ok].mean()
    y = b[ok] - b[ok].mean()
    den = math.sqrt(float(x @ x) * float(y @ y))
    if den == 0:
        return float("nan")
    return float(x @ y) / den


def collinearity_filter(X, names, cutoff=0.7):
    """Greedy pass in column order; a feature is dropped when |r| > cutoff
    against any already kept feature.

    Returns
    -------
    (list, SelectionReport)
    """
    X = np.asarray(X, dtype=float)
    names = list(names)
    report = SelectionReport()
    kept = []
    for j, name in enumerate(names):
        col = X[:, j]
        present = col[np.isfinite(col)]
        if present.size < 2 or np.ptp(present) == 0:
            report.dropped_constant.append(name)
            continue
        for k in kept:
            r = pairwise_pearson(X[:, names.index(k)], col)
            if abs(r) > cutoff:
                report.dropped_collinear.append((k, name, r))
                break
        else:
            kept.append(name)
    report.kept = list(kept)
    return kept, report


def f_test(column, classes):
    """One-way ANOVA F statistic and p-value for two groups.

    Returns ``(nan, nan)`` unless both classes have at least two present
    values.
    """
    column = np.asarray(column, dtype=float)
    classes = np.asarray(classes)
    ok = np.isfinite(column)
    groups = [column[ok & (classes == c)] for c in (0, 1)]
    if any(g.size < 2 for g in groups):
        return float("nan"), float("nan")
    n = sum(g.size for g in groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    ms_between = ss_between / 1.0
    ms_within = ss_within / (n - 2)
    if ms_within == 0:
        if ms_between == 0:
            return 0.0, 1.0
        return float("inf"), 0.0
    F = float(ms_between / ms_within)
    return F, f_sf(F, 1, n - 2)


def _group_stats(column, classes, c):
    v = column[np.isfinite(column) & (classes == c)]
    sd = float(np.std(v, ddof=1)) if v.size > 1 else float("nan")
    return (float(v.mean()) if v.size else float("nan")), sd, int(v.size)


def select_features(X, y, names, cutoff=0.7, alpha=0.05):
    """Collinearity filter, then keep features whose F-test p < ``alpha``.

    Parameters
    ----------
    X : (n, p) array with NaN for missing cells
    y : (n,) array of 0/1 classes
    names : sequence of p feature names in canonical order

    Returns
    -------
    (list, SelectionReport)
        Kept names in canonical order; report rows sorted by descending F.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    names = list(names)
    if X.shape[0] == 0:
        raise ValueError("no rows")
    candidates, report = collinearity_filter(X, names, cutoff)
    results = []
    for name in candidates:
        col = X[:, names.index(name)]
        F, p = f_test(col, y)
        if math.isnan(F):
            continue
        mg, sg, ng = _group_stats(col, y, 0)
        mp, sp, npoor = _group_stats(col, y, 1)
        results.append(FTestResult(name, F, p, mg, sg, mp, sp, ng, npoor))
    results.sort(key=lambda r: (-r.F, names.index(r.feature)))
    report.f_results = results
    keep = {r.feature for r in results if r.p < alpha}
    report.kept = [n for n in candidates if n in keep]
    return list(report.kept), report


def select_matrix(matrix, cutoff=0.7, alpha=0.05):
    return select_features(matrix.X, matrix.y, matrix.feature_names, cutoff, alpha)


def _fmt_p(p):
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def format_selection_table(report, alpha=0.05, display=True):
    """Text table: feature, F-value, p-value, Mean (SD) for good and poor."""
    head = f"{'Feature':<26}{'F-value':>10}{'p-value':>10}{'Good':>22}{'Poor':>22}"
    lines = [head, "-" * len(head)]
    for r in report.f_results:
        if not r.p < alpha:
            continue
        name = display_name(r.feature) if display else r.feature
        lines.append(
            f"{name:<26}{r.F:>10.3f}{_fmt_p(r.p):>10}"
            f"{f'{r.mean_good:.3f} ({r.sd_good:.3f})':>22}{f'{r.mean_poor:.3f} ({r.sd_poor:.3f})':>22}"
        )
    return "\n".join(lines)


def write_selection_csv(report, path, alpha=None):
    """Per-feature F-test results; only p < alpha rows when ``alpha`` is given."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "F", "p", "good_mean", "good_sd", "poor_mean", "poor_sd",
                    "good_mean_sd", "poor_mean_sd"])
        for r in report.f_results:
            if alpha is not None and not r.p < alpha:
                continue
            w.writerow([
                r.feature, repr(r.F), repr(r.p), repr(r.mean_good), repr(r.sd_good),
                repr(r.mean_poor), repr(r.sd_poor),
                f"{r.mean_good:.3f} ({r.sd_good:.3f})", f"{r.mean_poor:.3f} ({r.sd_poor:.3f})",
            ])
