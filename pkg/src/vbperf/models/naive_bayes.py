"""Gaussian naive Bayes with a variance floor."""

import numpy as np

DEFAULTS = {"var_floor": 1e-9}


def fit(X, y, hp, rng=None):
    params = {"theta": [], "var": [], "log_prior": []}
    for c in (0, 1):
        Xc = X[y == c]
        params["theta"].append(Xc.mean(axis=0))
        params["var"].append(np.maximum(Xc.var(axis=0), hp["var_floor"]))
        params["log_prior"].append(np.log(Xc.shape[0] / X.shape[0]))
    return {k: np.asarray(v) for k, v in params.items()}


def _joint_log_likelihood(params, X):
    out = []
    for c in (0, 1):
        var = params["var"][c]
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum((X - params["theta"][c]) ** 2 / var, axis=1)
        out.append(ll + params["log_prior"][c])
    return out


def predict_proba(params, X):
    l0, l1 = _joint_log_likelihood(params, X)
    return 0.5 * (1.0 + np.tanh(0.5 * (l1 - l0)))


def to_json(params):
    return {k: np.asarray(v).tolist() for k, v in params.items()}


def from_json(d):
    return {k: np.asarray(v, dtype=float) for k, v in d.items()}
