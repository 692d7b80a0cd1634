"""Spearman rank correlation and the survey / box-score / sensor correlation tables."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .. import ingest
from ..labels import BOX_METRICS, hit_percentage
from .special import student_t_two_sided_p

BOX_DISPLAY = {
    "kills": "Kills", "digs": "Digs", "service_aces": "Service Aces", "points": "Points",
    "block_solos": "Block Solos", "total_attempts": "Total Attempts",
    "service_errors": "Service Errors", "block_errors": "Block Errors",
    "ball_handling_errors": "Ball Handling Errors", "assists": "Assists", "errors": "Errors",
    "reception_errors": "Reception Errors", "hit_percentage": "Hit Percentage",
}
EMA_DISPLAY = {item: "Perceived " + item.replace("_", " ").title() for item in ingest.EMA_ITEMS}


@dataclass(frozen=True)
class CorrelationEntry:
    variable: str
    rho: float
    p: float
    n: int


def midranks(a):
    """Ranks starting at 1 with ties replaced by their average rank."""
    a = np.asarray(a, dtype=float)
    order = np.argsort(a, kind="mergesort")
    s = a[order]
    bounds = np.flatnonzero(np.r_[True, s[1:] != s[:-1], True])
    avg = (bounds[:-1] + bounds[1:] + 1) / 2.0
    ranks = np.empty(a.size)
    ranks[order] = np.repeat(avg, np.diff(bounds))
    return ranks


def _pearson(x, y):
    x = x - x.mean()
    y = y - y.mean()
    den = math.sqrt(float(x @ x) * float(y @ y))
    if den == 0:
        return float("nan")
    return max(-1.0, min(1.0, float(x @ y) / den))


def spearman(x, y, permutations=0, seed=0):
    """Spearman's rho with a two-sided p-value.

    Pairs with a missing side are dropped.  The p-value uses the t
    approximation with n - 2 degrees of freedom, or a permutation test when
    ``permutations`` > 0.

    Returns
    -------
    (rho, p)
        Both NaN with fewer than three pairs or a constant variable.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = x.size
    if n < 3:
        return float("nan"), float("nan")
    rx, ry = midranks(x), midranks(y)
    rho = _pearson(rx, ry)
    if math.isnan(rho):
        return float("nan"), float("nan")
    if permutations:
        rng = np.random.default_rng(seed)
        hits = sum(abs(_pearson(rx, rng.permutation(ry))) >= abs(rho) - 1e-12 for _ in range(permutations))
        return rho, (1.0 + hits) / (1.0 + permutations)
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, student_t_two_sided_p(t, n - 2)


def _entry(name, x, y, **kw):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho, p = spearman(x, y, **kw)
    return CorrelationEntry(name, rho, p, int(np.sum(np.isfinite(x) & np.isfinite(y))))


def _significant(entries, alpha, full):
    if full:
        return entries
    return [e for e in entries if e.p < alpha]


def _in_phases(dates, phase_ids, phase_config):
    return np.array([ingest.assign_phase(d, phase_config) in phase_ids for d in dates], dtype=bool)


def ema_vs_season(dataset, phase_ids, labels, phase_config=None, alpha=0.05, full=False, **kw):
    """Correlate each subject-day's EMA item means with that subject's season hit average.

    Every survey day counts as one observation paired with the subject's
    constant season average.
    """
    phase_config = phase_config or ingest.PhaseConfig(timezone=dataset.timezone)
    table = ingest.ema_daily_table(dataset)
    if not phase_ids or table.empty:
        return []
    table = table[table["subject"].isin(list(labels))]
    table = table[_in_phases(table["date"], set(phase_ids), phase_config)]
    if table.empty:
        return []
    season = table["subject"].map({s: lab.season_hit_avg for s, lab in labels.items()}).to_numpy(float)
    entries = [_entry(item, table[item].to_numpy(float), season, **kw) for item in ingest.EMA_ITEMS]
    return _significant(entries, alpha, full)


def match_day_hits(dataset, phase_ids=(4,), phase_config=None):
    """{(subject, date): hit percentage} for matches with attempts in the phases."""
    phase_config = phase_config or ingest.PhaseConfig(timezone=dataset.timezone)
    out = {}
    for subj in dataset:
        for b in subj.boxscores:
            if b.attempts > 0 and ingest.assign_phase(b.date, phase_config) in set(phase_ids):
                out[(subj.subject_id, b.date)] = hit_percentage(b.kills, b.errors, b.attempts)
    return out


def daily_hits_vs(dataset, variables=ingest.EMA_ITEMS, phase=4, matrix=None, phase_config=None,
                  alpha=0.05, full=True, **kw):
    """Same-day pairing of match hit percentage with EMA items or sensor features.

    Parameters
    ----------
    variables : sequence of str
        EMA item names and/or feature names of ``matrix``.
    matrix : FeatureMatrix, optional
        Required for sensor-feature variables.
    """
    hits = match_day_hits(dataset, (phase,), phase_config)
    keys = sorted(hits)
    if not keys:
        return []
    h = np.array([hits[k] for k in keys])
    ema = ingest.ema_daily_table(dataset).set_index(["subject", "date"])
    rows = {}
    if matrix is not None:
        rows = {(s, ingest.to_date(d)): i for i, (s, d) in enumerate(zip(matrix.subjects, matrix.dates))}
    entries = []
    for var in variables:
        if var in ingest.EMA_ITEMS:
            vals = np.array([ema[var].get(k, np.nan) if k in ema.index else np.nan for k in keys], dtype=float)
        elif matrix is not None and var in matrix.feature_names:
            col = matrix.column(var)
            vals = np.array([col[rows[k]] if k in rows else np.nan for k in keys])
        else:
            raise KeyError(f"unknown variable {var!r}")
        entries.append(_entry(var, vals, h, **kw))
    return _significant(entries, alpha, full)


def perceived_vs_box_metrics(dataset, item="performance", phase=4, phase_config=None, alpha=0.05,
                             full=True, **kw):
    """Correlate a same-day EMA item with every box-score metric and hit percentage."""
    phase_config = phase_config or ingest.PhaseConfig(timezone=dataset.timezone)
    ema = ingest.ema_daily_table(dataset).set_index(["subject", "date"])
    pairs = []
    for subj in dataset:
        for b in subj.boxscores:
            if ingest.assign_phase(b.date, phase_config) != phase:
                continue
            key = (subj.subject_id, b.date)
            if key in ema.index and math.isfinite(ema[item].get(key, np.nan)):
                pairs.append((ema[item][key], b))
    if not pairs:
        return []
    perceived = np.array([p for p, _ in pairs], dtype=float)
    entries = []
    for metric in ("kills", "digs", "service_aces", "points", "block_solos", "total_attempts",
                   "service_errors", "block_errors", "ball_handling_errors", "assists", "errors",
                   "reception_errors"):
        assert metric in BOX_METRICS
        vals = np.array([b.metric(metric) for _, b in pairs], dtype=float)
        entries.append(_entry(metric, vals, perceived, **kw))
    hp = np.array([b.hit_percentage for _, b in pairs], dtype=float)
    entries.append(_entry("hit_percentage", hp, perceived, **kw))
    return _significant(entries, alpha, full)


def sort_entries(entries, by="p"):
    if by == "abs_rho":
        return sorted(entries, key=lambda e: (-abs(e.rho) if math.isfinite(e.rho) else 0.0, e.variable))
    return sorted(entries, key=lambda e: (-(e.p if math.isfinite(e.p) else 2.0), e.variable))


def write_correlation_csv(entries, path, phase=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["variable", "p", "rho", "n"]
        w.writerow((["phase"] if phase is not None else []) + head)
        for e in entries:
            row = [e.variable, repr(float(e.p)), repr(float(e.rho)), e.n]
            w.writerow(([phase] if phase is not None else []) + row)


def format_correlation_table(entries, names=None):
    """Text table of (variable, p-value, rho); ``names`` maps or renames variables."""
    if names is None:
        label = str
    elif callable(names):
        label = names
    else:
        label = lambda v: names.get(v, v)  # noqa: E731
    lines = [f"{'':<28}{'p-value':>10}{'Spearman rho':>14}"]
    for e in entries:
        p = "<0.001" if e.p < 0.001 else f"{e.p:.3f}"
        lines.append(f"{label(e.variable):<28}{p:>10}{e.rho:>14.3f}")
    return "\n".join(lines)
