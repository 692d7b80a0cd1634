"""Budgeted random search scored by inner leave-one-subject-out F1."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..metrics import metrics
from ..preprocess import prepare_fold

log = logging.getLogger(__name__)

# (type, low, high) for numeric ranges, ("choice", options) for categorical
SEARCH_SPACES = {
    "gradient_boosted_trees": {
        "n_rounds": ("int", 50, 300),
        "learning_rate": ("log", 0.01, 0.3),
        "max_depth": ("int", 2, 6),
        "min_child_weight": ("log", 0.1, 10.0),
        "reg_lambda": ("log", 0.01, 10.0),
        "subsample": ("float", 0.5, 1.0),
        "colsample": ("float", 0.5, 1.0),
    },
    "bagged_trees": {
        "n_trees": ("int", 50, 300),
        "max_depth": ("int", 3, 12),
        "max_features": ("float", 0.2, 1.0),
        "min_samples_leaf": ("int", 1, 10),
    },
    "gaussian_nb": {
        "var_floor": ("log", 1e-12, 1e-6),
    },
    "linear_svm": {
        "lam": ("log", 1e-4, 1.0),
        "epochs": ("int", 100, 1000),
    },
}


@dataclass(frozen=True)
class Trial:
    index: int
    hyperparameters: dict
    f1: float


def _draw(rng, dim):
    kind = dim[0]
    if kind == "int":
        return int(rng.integers(dim[1], dim[2] + 1))
    if kind == "float":
        return float(rng.uniform(dim[1], dim[2]))
    if kind == "log":
        return float(math.exp(rng.uniform(math.log(dim[1]), math.log(dim[2]))))
    if kind == "choice":
        options = dim[1]
        return options[int(rng.integers(len(options)))]
    raise ValueError(f"unknown search dimension {dim!r}")


def sample_hyperparameters(space, rng):
    return {name: _draw(rng, space[name]) for name in sorted(space)}


def inner_loso_f1(spec, X, y, groups, use_smote=True, smote_k=5):
    """Pooled F1 of ``spec`` over leave-one-group-out folds of the given rows."""
    from . import train, score

    scores, truths = [], []
    names = tuple(f"f{j}" for j in range(X.shape[1]))
    for i, g in enumerate(sorted(set(groups))):
        test = groups == g
        if np.unique(y[~test]).size < 2:
            continue
        try:
            tr, ytr, te, _ = prepare_fold(X[~test], y[~test], X[test], use_smote, smote_k, spec.seed + i)
        except ValueError:
            continue
        model = train(spec, tr, ytr, names)
        scores.append(score(model, te, names))
        truths.append(y[test])
    if not scores:
        return 0.0
    return metrics(np.concatenate(scores), np.concatenate(truths))["f1"]


def tune(kind, X, y, groups, search_space=None, budget=50, inner_seed=0, base=None,
         use_smote=True, smote_k=5):
    """Random search over ``search_space``; returns (best ModelSpec, trials).

    Each trial is scored by inner leave-one-subject-out F1 on the rows
    given, which must all be training rows.  Ties keep the earlier trial.
    """
    from . import ModelSpec

    if budget < 1:
        raise ValueError("budget must be at least 1")
    space = SEARCH_SPACES[kind] if search_space is None else search_space
    rng = np.random.default_rng(inner_seed)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    groups = np.asarray(groups, dtype=object)
    best, best_f1 = None, -1.0
    trials = []
    for i in range(budget):
        hp = {**(base or {}), **sample_hyperparameters(space, rng)}
        spec = ModelSpec(kind, hp, inner_seed)
        f1 = inner_loso_f1(spec, X, y, groups, use_smote, smote_k)
        trials.append(Trial(i, hp, f1))
        log.debug("trial %d f1=%.4f %s", i, f1, hp)
        if f1 > best_f1:
            best, best_f1 = spec, f1
    return best, trials
