"""Logistic-loss gradient boosting with second-order leaf values."""

import numpy as np

from .trees import Tree, bin_codes, grow_tree, split_candidates

DEFAULTS = {
    "n_rounds": 100,
    "learning_rate": 0.1,
    "max_depth": 3,
    "max_leaves": 8,
    "growth": "level",
    "min_child_weight": 1.0,
    "reg_lambda": 1.0,
    "gamma": 0.0,
    "subsample": 1.0,
    "colsample": 1.0,
    "max_bins": 64,
}


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_loss(y, raw):
    # log(1 + exp(raw)) - y * raw, computed stably
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def fit(X, y, hp, rng):
    """Fit boosted trees; returns the parameter dictionary."""
    n, p = X.shape
    thresholds = split_candidates(X, int(hp["max_bins"]))
    codes = bin_codes(X, thresholds)
    base_rate = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    init = float(np.log(base_rate / (1 - base_rate)))
    raw = np.full(n, init)
    trees = []
    losses = [log_loss(y, raw)]
    lr = float(hp["learning_rate"])
    n_cols = max(1, int(round(hp["colsample"] * p)))
    for _ in range(int(hp["n_rounds"])):
        prob = _sigmoid(raw)
        g = prob - y
        h = prob * (1.0 - prob)
        rows = None
        if hp["subsample"] < 1.0:
            m = max(2, int(round(hp["subsample"] * n)))
            rows = np.sort(rng.choice(n, size=m, replace=False))
        sampler = None
        if n_cols < p:
            cols = np.sort(rng.choice(p, size=n_cols, replace=False))
            sampler = lambda cols=cols: cols  # noqa: E731
        tree = grow_tree(
            codes, thresholds, g, h, rows=rows, growth=hp["growth"], max_depth=int(hp["max_depth"]),
            max_leaves=int(hp["max_leaves"]), reg_lambda=float(hp["reg_lambda"]),
            min_child_weight=float(hp["min_child_weight"]), gamma=float(hp["gamma"]),
            feature_sampler=sampler,
        )
        tree.value = tree.value * lr
        raw = raw + tree.predict(X)
        trees.append(tree)
        losses.append(log_loss(y, raw))
    return {"init": init, "trees": trees, "train_loss": losses}


def decision_function(params, X):
    raw = np.full(X.shape[0], params["init"])
    for tree in params["trees"]:
        raw += tree.predict(X)
    return raw


def predict_proba(params, X):
    return _sigmoid(decision_function(params, X))


def to_json(params):
    return {"init": params["init"], "trees": [t.to_dict() for t in params["trees"]],
            "train_loss": list(params["train_loss"])}


def from_json(d):
    return {"init": d["init"], "trees": [Tree.from_dict(t) for t in d["trees"]],
            "train_loss": d["train_loss"]}
