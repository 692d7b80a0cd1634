"""Classifier families behind one ``train`` / ``score`` interface.

Positive class is 1 (poor performer).  Scores are probability-like values in
[0, 1]; the predicted class is ``score >= 0.5``.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import boosting, forest, naive_bayes, svm

FORMAT_VERSION = 1

KINDS = {
    "gradient_boosted_trees": boosting,
    "bagged_trees": forest,
    "gaussian_nb": naive_bayes,
    "linear_svm": svm,
}

# the five families compared in the study; both boosting entries share one implementation
PROFILES = {
    "xgb": ("gradient_boosted_trees", {"growth": "level", "max_depth": 3}),
    "lgbm": ("gradient_boosted_trees", {"growth": "leaf", "max_leaves": 8, "max_depth": -1}),
    "rf": ("bagged_trees", {}),
    "gnb": ("gaussian_nb", {}),
    "svm": ("linear_svm", {}),
}
PROFILES["gbt"] = PROFILES["xgb"]


def schema_fingerprint(feature_names):
    return hashlib.sha256("\x1f".join(feature_names).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        unknown = set(self.hyperparameters) - set(KINDS[self.kind].DEFAULTS)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.kind}: {sorted(unknown)}")

    def resolved(self):
        hp = dict(KINDS[self.kind].DEFAULTS)
        hp.update(self.hyperparameters)
        return hp

    @classmethod
    def from_profile(cls, name, seed=0, **overrides):
        kind, hp = PROFILES[name]
        return cls(kind, {**hp, **overrides}, seed)


@dataclass
class TrainedModel:
    kind: str
    hyperparameters: dict
    params: dict
    feature_names: tuple
    seed: int = 0

    @property
    def fingerprint(self):
        return schema_fingerprint(self.feature_names)


def train(spec, X, y, feature_names):
    """Fit ``spec`` on a fully numeric matrix with both classes present."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, p) with one label per row")
    if X.shape[1] != len(feature_names):
        raise ValueError("feature_names must name every column")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains missing or non-finite values")
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ValueError("degenerate labels: both classes are required")
    rng = np.random.default_rng(spec.seed)
    hp = spec.resolved()
    params = KINDS[spec.kind].fit(X, y.astype(float), hp, rng)
    return TrainedModel(spec.kind, hp, params, tuple(feature_names), spec.seed)


def score(model, X, feature_names):
    """Probability-like class-1 score per row; schema must match training."""
    if schema_fingerprint(tuple(feature_names)) != model.fingerprint:
        raise ValueError("feature schema does not match the trained model")
    X = np.asarray(X, dtype=float)
    return np.clip(KINDS[model.kind].predict_proba(model.params, X), 0.0, 1.0)


def predict(model, X, feature_names, threshold=0.5):
    return (score(model, X, feature_names) >= threshold).astype(np.int64)


def dumps(model):
    """Self-describing JSON text for a trained model."""
    doc = {
        "format": "vbperf-model",
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "schema_fingerprint": model.fingerprint,
        "params": KINDS[model.kind].to_json(model.params),
    }
    return json.dumps(doc, sort_keys=True)


def loads(text):
    doc = json.loads(text)
    if doc.get("format") != "vbperf-model" or doc.get("format_version") != FORMAT_VERSION:
        raise ValueError("not a supported model file")
    model = TrainedModel(doc["kind"], doc["hyperparameters"], KINDS[doc["kind"]].from_json(doc["params"]),
                         tuple(doc["feature_names"]), doc["seed"])
    if model.fingerprint != doc["schema_fingerprint"]:
        raise ValueError("model file fingerprint does not match its feature list")
    return model


from .tuning import SEARCH_SPACES, tune  # noqa: E402

__all__ = [
    "KINDS", "PROFILES", "ModelSpec", "TrainedModel", "train", "score", "predict", "dumps", "loads",
    "schema_fingerprint", "tune", "SEARCH_SPACES",
]
