"""OLS trend of per-match hit percentage over the season, by position."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .special import student_t_two_sided_p

log = logging.getLogger(__name__)


@dataclass
class TrendResult:
    names: list
    coef: np.ndarray
    se: np.ndarray
    p: np.ndarray
    n: int
    df: int
    reference: str
    dropped: list = field(default_factory=list)
    position_slopes: dict = field(default_factory=dict)  # position -> (slope, se, p)
    player_slopes: dict = field(default_factory=dict)
    mean_slope: float = float("nan")
    mean_slope_p: float = float("nan")
    residuals: np.ndarray = None
    design: np.ndarray = None

    def coefficient(self, name):
        i = self.names.index(name)
        return float(self.coef[i]), float(self.p[i])


def _p_from(est, se, df):
    if df <= 0 or not math.isfinite(se):
        return float("nan")
    if se == 0:
        return 1.0 if est == 0 else 0.0
    return student_t_two_sided_p(est / se, df)


def _independent_columns(cols, names):
    kept, kept_names, dropped = [], [], []
    for c, nm in zip(cols, names):
        trial = np.column_stack(kept + [c])
        if np.linalg.matrix_rank(trial) == trial.shape[1]:
            kept.append(c)
            kept_names.append(nm)
        else:
            dropped.append(nm)
    return np.column_stack(kept), kept_names, dropped


def simple_slope(days, hits):
    x = np.asarray(days, dtype=float)
    y = np.asarray(hits, dtype=float)
    xc = x - x.mean()
    den = float(xc @ xc)
    if den == 0:
        return float("nan")
    return float(xc @ (y - y.mean()) / den)


def ols_trend(hits, days, positions, subjects=None, reference=None):
    """Regress hit percentage on season day with position dummies and interactions.

    Parameters
    ----------
    hits : per-match hit percentages
    days : days since season start for each match
    positions : position of the player in each match
    subjects : optional player ids, enabling per-player slopes and the
        test that the mean per-player slope is zero
    reference : position used as the baseline level (default: ``outside``
        when present, else the first in sorted order)

    Returns
    -------
    TrendResult
        Coefficients ``intercept``, ``day``, ``pos[<p>]`` and
        ``day:pos[<p>]``; columns that would make the design rank deficient
        are dropped and listed in ``dropped``.
    """
    y = np.asarray(hits, dtype=float)
    t = np.asarray(days, dtype=float)
    pos = np.asarray(positions, dtype=object)
    levels = sorted(set(pos))
    if reference is None:
        reference = "outside" if "outside" in levels else levels[0]
    if reference not in levels:
        raise ValueError(f"reference position {reference!r} absent from data")
    others = [lv for lv in levels if lv != reference]
    cols = [np.ones_like(t), t]
    names = ["intercept", "day"]
    for lv in others:
        d = (pos == lv).astype(float)
        cols.append(d)
        names.append(f"pos[{lv}]")
    for lv in others:
        d = (pos == lv).astype(float)
        cols.append(d * t)
        names.append(f"day:pos[{lv}]")
    X, names, dropped = _independent_columns(cols, names)
    if dropped:
        log.warning("rank-deficient design; dropped %s", dropped)
    n, k = X.shape
    df = n - k
    if np.ptp(y) == 0:
        coef = np.zeros(k)
        coef[0] = y[0]
        resid = np.zeros(n)
        cov = np.zeros((k, k))
    else:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        sigma2 = float(resid @ resid) / df if df > 0 else float("nan")
        cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    p = np.array([_p_from(b, s, df) for b, s in zip(coef, se)])
    res = TrendResult(names, coef, se, p, n, df, reference, dropped, residuals=resid, design=X)

    for lv in levels if "day" in names else ():
        c = np.zeros(k)
        c[names.index("day")] = 1.0
        inter = f"day:pos[{lv}]"
        if lv != reference:
            if inter not in names:
                continue
            c[names.index(inter)] = 1.0
        est = float(c @ coef)
        s = float(math.sqrt(max(c @ cov @ c, 0.0)))
        res.position_slopes[lv] = (est, s, _p_from(est, s, df))

    if subjects is not None:
        subj = np.asarray(subjects, dtype=object)
        for sid in sorted(set(subj)):
            m = subj == sid
            if np.unique(t[m]).size >= 2:
                res.player_slopes[sid] = simple_slope(t[m], y[m])
        slopes = np.array(list(res.player_slopes.values()))
        if slopes.size >= 2:
            res.mean_slope = float(slopes.mean())
            sd = float(slopes.std(ddof=1))
            res.mean_slope_p = _p_from(res.mean_slope, sd / math.sqrt(slopes.size), slopes.size - 1)
    return res


def format_trend(res):
    lines = [f"OLS hit% ~ day * position (reference: {res.reference}, n={res.n})"]
    for nm, b, s, p in zip(res.names, res.coef, res.se, res.p):
        lines.append(f"  {nm:<24}{b:>10.4f}  se={s:.4f}  p={p:.3f}")
    for lv, (b, s, p) in res.position_slopes.items():
        lines.append(f"  slope[{lv}]{'':<{max(0, 17 - len(lv))}}{b:>10.4f}  se={s:.4f}  p={p:.3f}")
    if math.isfinite(res.mean_slope):
        lines.append(f"  mean player slope {res.mean_slope:.4f} (p = {res.mean_slope_p:.3f})")
    if res.dropped:
        lines.append(f"  dropped (rank deficient): {', '.join(res.dropped)}")
    return "\n".join(lines)
