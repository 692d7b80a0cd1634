"""Numerical routines on uniformly sampled series.

Detrended fluctuation analysis (DFA-1) and the Hurst exponent derived from
it, sample / approximate entropy, co-occurrence (second-order) statistics and
higher moments.  Missing samples are represented as NaN and are dropped by
concatenation before any computation; undefined results are returned as NaN.
"""

from dataclasses import dataclass, field

import numpy as np

DFA_WINDOWS = (10, 20, 30, 40, 50, 60)

# ordered by sleep depth
STAGE_CODES = {"wake": 0, "rem": 1, "light": 2, "deep": 3}

_BLOCK_CELLS = 1 << 22
_RELATIVE_FLOOR = 1e-12


@dataclass
class MinuteSeries:
    """Uniformly sampled values with a missingness mask.

    ``step`` is the sampling interval in minutes.  ``missing`` is True where
    no observation exists; the corresponding entry of ``values`` is ignored.
    """

    values: np.ndarray
    step: float = 1.0
    missing: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("MinuteSeries needs a non-empty 1-d array")
        if self.missing is None:
            self.missing = ~np.isfinite(self.values)
        else:
            self.missing = np.asarray(self.missing, dtype=bool)
        if self.missing.shape != self.values.shape:
            raise ValueError("mask length must equal values length")

    def present(self):
        return self.values[~self.missing]


@dataclass
class DfaResult:
    window_sizes: np.ndarray
    fluctuations: np.ndarray
    hurst: float = field(default=float("nan"))


def _present(series):
    if isinstance(series, MinuteSeries):
        return series.present(), series.step
    x = np.asarray(series, dtype=float).ravel()
    return x[np.isfinite(x)], 1.0


def _window_samples(window_n, step):
    return int(round(window_n / step))


def dfa_fluctuation(series, window_n, step=None):
    """Fluctuation function F(n) of DFA-1 for one window size.

    The mean-centred series is integrated, cut into non-overlapping windows
    of ``window_n`` minutes taken from both ends, each window is detrended by
    a least-squares line and F(n) is the root of the mean squared residual
    over all windows.

    Parameters
    ----------
    series : array_like or MinuteSeries
        Samples; NaN entries are dropped.
    window_n : float
        Window length in minutes.
    step : float, optional
        Sampling interval in minutes.  Defaults to the series' own step
        (1 for plain arrays).

    Returns
    -------
    float
        F(n), or NaN when fewer than ``2 * n`` samples are present or the
        window holds fewer than 4 samples.  Values at rounding level
        relative to the profile are reported as 0.
    """
    x, own_step = _present(series)
    n = _window_samples(window_n, own_step if step is None else step)
    if n < 4 or x.size < 2 * n:
        return float("nan")
    if np.ptp(x) == 0:
        return 0.0
    profile = np.cumsum(x - x.mean())
    k = profile.size // n
    segments = np.concatenate(
        [profile[: k * n].reshape(k, n), profile[profile.size - k * n:].reshape(k, n)]
    )
    t = np.arange(n, dtype=float)
    t -= t.mean()
    centred = segments - segments.mean(axis=1, keepdims=True)
    slope = centred @ t / (t @ t)
    resid = centred - slope[:, None] * t[None, :]
    f = float(np.sqrt(np.mean(resid * resid)))
    # a profile that is linear inside every window leaves only rounding noise
    if f <= _RELATIVE_FLOOR * float(np.sqrt(np.mean(profile * profile))):
        return 0.0
    return f


def dfa(series, window_sizes=DFA_WINDOWS, step=None):
    """Run DFA-1 over several window sizes and fit the scaling exponent.

    Returns
    -------
    DfaResult
        Only window sizes with a defined, positive F(n) are reported.
    """
    sizes = np.asarray(sorted(window_sizes), dtype=float)
    flucts = np.array([dfa_fluctuation(series, n, step) for n in sizes])
    ok = np.isfinite(flucts) & (flucts > 0)
    sizes, flucts = sizes[ok], flucts[ok]
    hurst = float("nan")
    if sizes.size >= 3:
        hurst = _loglog_slope(sizes, flucts)
    return DfaResult(window_sizes=sizes.astype(int), fluctuations=flucts, hurst=hurst)


def _loglog_slope(sizes, flucts):
    lx = np.log(sizes)
    ly = np.log(flucts)
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))


def hurst_from_dfa(series, window_sizes=DFA_WINDOWS, step=None):
    """Least-squares slope of log F(n) against log n (NaN if < 3 valid sizes)."""
    return dfa(series, window_sizes, step).hurst


def _tolerance(x, r, r_ratio):
    if r is not None:
        return float(r)
    return r_ratio * float(np.std(x))


def _template_matches(x, length, n_templates, tol, lengths):
    """Yield (row offset, {L: match matrix}) blocks of template comparisons.

    ``match[L][i, j]`` is True when templates ``i`` and ``j`` of length
    ``L`` agree within ``tol`` at every position (Chebyshev distance).  All
    lengths in ``lengths`` must be <= ``length``.
    """
    span = n_templates + length - 1
    block = max(1, _BLOCK_CELLS // max(span, 1))
    for a in range(0, n_templates, block):
        b = min(a + block, n_templates)
        close = np.abs(x[a:b + length - 1, None] - x[None, :span]) <= tol
        acc = np.ones((b - a, n_templates), dtype=bool)
        out = {}
        for k in range(max(lengths)):
            acc &= close[k:k + b - a, k:k + n_templates]
            if k + 1 in lengths:
                out[k + 1] = acc.copy()
        yield a, out


def sample_entropy(series, m=2, r=None, r_ratio=0.2):
    """Sample entropy, -ln(A/B), with Chebyshev distance and no self-matches.

    ``B`` counts template pairs of length ``m`` within tolerance ``r`` and
    ``A`` the same pairs still matching at length ``m + 1``; both use the
    first ``N - m`` templates.  ``r`` defaults to ``r_ratio`` times the
    population standard deviation.

    Returns NaN for constant series, series shorter than ``m + 2`` and when
    either count is zero.
    """
    x, _ = _present(series)
    n = x.size
    if n < m + 2 or np.ptp(x) == 0:
        return float("nan")
    tol = _tolerance(x, r, r_ratio)
    n_templates = n - m
    a_count = 0
    b_count = 0
    for a, match in _template_matches(x, m + 1, n_templates, tol, (m, m + 1)):
        rows = match[m].shape[0]
        upper = np.arange(n_templates)[None, :] > np.arange(a, a + rows)[:, None]
        b_count += int(np.count_nonzero(match[m] & upper))
        a_count += int(np.count_nonzero(match[m + 1] & upper))
    if a_count == 0 or b_count == 0:
        return float("nan")
    return float(-np.log(a_count / b_count))


def approximate_entropy(series, m=2, r=None, r_ratio=0.2):
    """Approximate entropy Phi(m) - Phi(m+1), self-matches included.

    A constant series yields 0 since every template matches every other.
    """
    x, _ = _present(series)
    n = x.size
    if n < m + 2:
        return float("nan")
    tol = _tolerance(x, r, r_ratio)
    # one trailing NaN lets both template lengths share a single pass
    padded = np.append(x, np.nan)
    count = n - m + 1
    log_m = np.empty(count)
    log_m1 = np.empty(count - 1)
    for a, match in _template_matches(padded, m + 1, count, tol, (m, m + 1)):
        rows = match[m].shape[0]
        log_m[a:a + rows] = np.log(np.count_nonzero(match[m], axis=1) / count)
        keep = min(rows, count - 1 - a)
        if keep > 0:
            c1 = np.count_nonzero(match[m + 1][:keep, :count - 1], axis=1)
            log_m1[a:a + keep] = np.log(c1 / (count - 1))
    return float(log_m.mean() - log_m1.mean())


def quantize(x, levels):
    """Equal-width binning of ``x`` over its own range into ``levels`` codes."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros(x.size, dtype=np.int64)
    codes = np.floor((x - lo) / (hi - lo) * levels).astype(np.int64)
    return np.clip(codes, 0, levels - 1)


def cooccurrence_matrix(series, levels=8, lag=1):
    """Symmetrised, normalised co-occurrence matrix of lagged level pairs."""
    x, _ = _present(series)
    if x.size < lag + 1:
        raise ValueError("series shorter than lag + 1")
    q = quantize(x, levels)
    counts = np.zeros((levels, levels))
    np.add.at(counts, (q[:-lag], q[lag:]), 1.0)
    counts = counts + counts.T
    return counts / counts.sum()


def cooccurrence_stats(series, levels=8, lag=1):
    """Inertia, local homogeneity, correlation and energy of the lag-pair matrix.

    Returns
    -------
    dict
        Keys ``inertia``, ``local_homogeneity``, ``correlation``, ``energy``.
        Correlation is NaN when the level distribution has zero variance.
        All values are NaN when fewer than ``lag + 1`` samples are present.
    """
    x, _ = _present(series)
    if x.size < lag + 1:
        return dict.fromkeys(("inertia", "local_homogeneity", "correlation", "energy"), float("nan"))
    p = cooccurrence_matrix(x, levels, lag)
    i, j = np.indices(p.shape)
    diff2 = (i - j) ** 2
    mu_i = float((i * p).sum())
    mu_j = float((j * p).sum())
    sd_i = float(np.sqrt((((i - mu_i) ** 2) * p).sum()))
    sd_j = float(np.sqrt((((j - mu_j) ** 2) * p).sum()))
    if sd_i > 0 and sd_j > 0:
        corr = float((((i - mu_i) * (j - mu_j)) * p).sum() / (sd_i * sd_j))
    else:
        corr = float("nan")
    return {
        "inertia": float((diff2 * p).sum()),
        "local_homogeneity": float((p / (1.0 + diff2)).sum()),
        "correlation": corr,
        "energy": float((p * p).sum()),
    }


def moment_stats(series):
    """Mean, std, min, max, median, skewness (g1) and excess kurtosis.

    Moments are the biased sample moments; skewness and kurtosis need at
    least three samples and a non-zero spread.
    """
    x, _ = _present(series)
    keys = ("mean", "std", "min", "max", "median", "skewness", "kurtosis")
    if x.size == 0:
        return dict.fromkeys(keys, float("nan"))
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev ** 2))
    out = {
        "mean": mean,
        "std": float(np.sqrt(m2)),
        "min": float(x.min()),
        "max": float(x.max()),
        "median": float(np.median(x)),
        "skewness": float("nan"),
        "kurtosis": float("nan"),
    }
    if x.size >= 3 and np.ptp(x) > 0:
        out["skewness"] = float(np.mean(dev ** 3) / m2 ** 1.5)
        out["kurtosis"] = float(np.mean(dev ** 4) / m2 ** 2 - 3.0)
    return out
