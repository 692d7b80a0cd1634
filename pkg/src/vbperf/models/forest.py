"""Bagged decision trees with per-split feature subsampling (random forest)."""

import numpy as np

from .trees import Tree, bin_codes, grow_tree, split_candidates

DEFAULTS = {
    "n_trees": 100,
    "max_depth": 8,
    "max_features": "sqrt",
    "min_samples_leaf": 1,
    "bootstrap": True,
    "max_bins": 64,
}


def _n_features(spec, p):
    if spec == "sqrt":
        return max(1, int(np.sqrt(p)))
    if isinstance(spec, float) and spec <= 1.0:
        return max(1, int(round(spec * p)))
    return max(1, min(p, int(spec)))


def fit(X, y, hp, rng):
    n, p = X.shape
    thresholds = split_candidates(X, int(hp["max_bins"]))
    codes = bin_codes(X, thresholds)
    m = _n_features(hp["max_features"], p)
    trees = []
    for _ in range(int(hp["n_trees"])):
        if hp["bootstrap"]:
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
        else:
            w = np.ones(n)
        rows = np.flatnonzero(w > 0)
        sampler = None
        if m < p:
            sampler = lambda: np.sort(rng.choice(p, size=m, replace=False))  # noqa: E731
        tree = grow_tree(
            codes, thresholds, -w * y, w, rows=rows, growth="level", max_depth=int(hp["max_depth"]),
            reg_lambda=0.0, min_child_weight=float(hp["min_samples_leaf"]), gamma=1e-12,
            feature_sampler=sampler,
        )
        trees.append(tree)
    return {"trees": trees}


def predict_proba(params, X):
    return np.mean([t.predict(X) for t in params["trees"]], axis=0)


def to_json(params):
    return {"trees": [t.to_dict() for t in params["trees"]]}


def from_json(d):
    return {"trees": [Tree.from_dict(t) for t in d["trees"]]}
