"""Fold-local imputation, min-max scaling and SMOTE oversampling.

Every statistic is estimated on training rows only and then applied to
both splits.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class FittedTransform:
    means: np.ndarray = None
    mins: np.ndarray = None
    maxs: np.ndarray = None
    fit_row_ids: np.ndarray = None
    all_missing: list = field(default_factory=list)


def fit_apply_impute(train, test=None, transform=None):
    """Replace NaN cells of both splits by the training column means.

    A column with no training value is filled with 0 and recorded in
    ``transform.all_missing``.

    Returns
    -------
    (train_filled, test_filled, FittedTransform)
    """
    train = np.asarray(train, dtype=float)
    transform = transform or FittedTransform()
    present = np.isfinite(train)
    counts = present.sum(axis=0)
    sums = np.where(present, train, 0.0).sum(axis=0)
    means = np.zeros(train.shape[1])
    has = counts > 0
    means[has] = sums[has] / counts[has]
    transform.all_missing = [int(j) for j in np.flatnonzero(~has)]
    if transform.all_missing:
        log.warning("columns %s have no training values; filled with 0", transform.all_missing)
    transform.means = means

    def fill(a):
        a = np.array(a, dtype=float, copy=True)
        return np.where(np.isfinite(a), a, means[None, :])

    return fill(train), (None if test is None else fill(test)), transform


def fit_apply_minmax(train, test=None, transform=None):
    """Scale to [0, 1] with training min/max; test values are clipped.

    Constant training columns map to 0.
    """
    train = np.asarray(train, dtype=float)
    transform = transform or FittedTransform()
    lo = train.min(axis=0) if train.size else np.zeros(train.shape[1])
    hi = train.max(axis=0) if train.size else np.zeros(train.shape[1])
    transform.mins, transform.maxs = lo, hi
    span = hi - lo
    scale = np.where(span > 0, span, 1.0)

    def apply(a):
        out = (np.asarray(a, dtype=float) - lo) / scale
        out[:, span == 0] = 0.0
        return np.clip(out, 0.0, 1.0)

    return apply(train), (None if test is None else apply(test)), transform


def smote(X, y, k=5, seed=0):
    """Oversample the minority class up to the majority count.

    Each synthetic row interpolates between a minority row and one of its
    ``k`` nearest minority neighbours (Euclidean), ``x + u * (nb - x)`` with
    ``u ~ U[0, 1]``.  Base rows are visited in shuffled round-robin order.
    Original rows come first and are returned unchanged.

    Parameters
    ----------
    X : (n, p) array without missing values
    y : (n,) array of 0/1 labels
    k : int
        Neighbour count, capped at ``minority_count - 1``.
    seed : int or numpy Generator

    Returns
    -------
    (X_resampled, y_resampled)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2 or counts[0] == counts[1]:
        return X.copy(), y.copy()
    minority = classes[np.argmin(counts)]
    n_min, n_maj = counts.min(), counts.max()
    if n_min < 2:
        raise ValueError("insufficient minority samples for SMOTE")
    k = min(k, n_min - 1)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = X[y == minority]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps neighbour order deterministic under distance ties
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]
    n_new = n_maj - n_min
    base = np.concatenate([rng.permutation(n_min) for _ in range(-(-n_new // n_min))])[:n_new]
    pick = neighbours[base, rng.integers(0, k, size=n_new)]
    u = rng.random(n_new)[:, None]
    synthetic = pts[base] + u * (pts[pick] - pts[base])
    X_out = np.vstack([X, synthetic])
    y_out = np.concatenate([y, np.full(n_new, minority, dtype=y.dtype)])
    return X_out, y_out


def prepare_fold(train_X, train_y, test_X, use_smote=True, k=5, seed=0):
    """Impute, scale and (optionally) oversample one train/test split.

    Returns
    -------
    (X_train, y_train, X_test, FittedTransform)
    """
    tr, te, transform = fit_apply_impute(train_X, test_X)
    tr, te, transform = fit_apply_minmax(tr, te, transform)
    y = np.asarray(train_y)
    if use_smote:
        tr, y = smote(tr, y, k=k, seed=seed)
    return tr, y, te, transform
