"""Leave-one-subject-out evaluation, seed-repeated, with the six-metric report.

Per fold: select features, impute, scale, SMOTE, optionally tune, train and
score the held-out subject.  Every fitted quantity sees training rows only.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .metrics import METRIC_NAMES, metrics
from .models import ModelSpec, score, train, tune
from .preprocess import prepare_fold
from .selection import select_features

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    collinearity_cutoff: float = 0.7
    alpha: float = 0.05
    smote: bool = True
    smote_k: int = 5
    tune_budget: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.collinearity_cutoff <= 1:
            raise ValueError("collinearity cutoff must lie in (0, 1]")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.smote_k < 1 or self.tune_budget < 0:
            raise ValueError("smote_k must be >= 1 and tune_budget >= 0")


@dataclass
class FoldResult:
    subject: str
    train_rows: np.ndarray
    test_rows: np.ndarray
    selected: list
    selection: object
    transform: object
    spec: ModelSpec
    model: object
    scores: np.ndarray


@dataclass
class LosoResult:
    subjects: np.ndarray
    dates: np.ndarray
    scores: np.ndarray
    predicted: np.ndarray
    truths: np.ndarray
    folds: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


@dataclass
class EvalReport:
    per_iteration: list
    mean: dict
    std: dict
    predictions: list
    config: dict

    def summary(self, digits=4, sd_digits=3):
        """Metric -> 'mean (std)' strings, e.g. '0.7925 (0.004)'."""
        return {m: f"{self.mean[m]:.{digits}f} ({self.std[m]:.{sd_digits}f})" for m in METRIC_NAMES}


def fold_seeds(seed, fold):
    """Independent (smote, model) seeds for one fold of one repetition."""
    state = np.random.SeedSequence([int(seed), int(fold)]).generate_state(2)
    return int(state[0]), int(state[1])


def loso_splits(matrix):
    """(subject, train_rows, test_rows) per subject, in subject order."""
    subjects = np.asarray(matrix.subjects, dtype=object)
    uniq = sorted(set(subjects))
    if len(uniq) < 2:
        raise ValueError("LOSO requires >= 2 subjects")
    out = []
    for s in uniq:
        test = subjects == s
        out.append((s, np.flatnonzero(~test), np.flatnonzero(test)))
    return out


def run_fold(matrix, split, spec, config=PipelineConfig(), seed=0, fold=0):
    """Fit the full pipeline on the training rows of ``split`` and score its test rows.

    Returns None when the training rows lack a class.
    """
    subject, tr, te = split
    y_tr = matrix.y[tr]
    if np.unique(y_tr).size < 2:
        log.warning("fold %s skipped: training rows hold a single class", subject)
        return None
    names = list(matrix.feature_names)
    selected, report = select_features(matrix.X[tr], y_tr, names, config.collinearity_cutoff, config.alpha)
    if not selected:
        if not report.f_results:
            log.warning("fold %s skipped: no testable feature", subject)
            return None
        selected = [report.f_results[0].feature]
        log.info("fold %s: no feature reached p < %g; using %s", subject, config.alpha, selected[0])
    cols = [names.index(f) for f in selected]
    smote_seed, model_seed = fold_seeds(seed, fold)
    X_tr, y_fit, X_te, transform = prepare_fold(
        matrix.X[np.ix_(tr, cols)], y_tr, matrix.X[np.ix_(te, cols)], config.smote, config.smote_k, smote_seed)
    transform.fit_row_ids = tr.copy()
    fold_spec = ModelSpec(spec.kind, dict(spec.hyperparameters), model_seed)
    if config.tune_budget:
        groups = np.asarray(matrix.subjects, dtype=object)[tr]
        X_raw = matrix.X[np.ix_(tr, cols)]
        fold_spec, _ = tune(spec.kind, X_raw, y_tr, groups, budget=config.tune_budget, inner_seed=model_seed,
                            base=dict(spec.hyperparameters), use_smote=config.smote, smote_k=config.smote_k)
    model = train(fold_spec, X_tr, y_fit, selected)
    scores = score(model, X_te, selected)
    return FoldResult(subject, tr, te, selected, report, transform, fold_spec, model, scores)


def run_loso(matrix, spec, config=PipelineConfig(), seed=0, keep_artifacts=False):
    """Pooled day-level predictions over all leave-one-subject-out folds."""
    n = len(matrix)
    scores = np.full(n, np.nan)
    folds, skipped = [], []
    for i, split in enumerate(loso_splits(matrix)):
        res = run_fold(matrix, split, spec, config, seed, i)
        if res is None:
            skipped.append(split[0])
            continue
        scores[res.test_rows] = res.scores
        if keep_artifacts:
            folds.append(res)
    done = np.isfinite(scores)
    return LosoResult(
        matrix.subjects[done], matrix.dates[done], scores[done],
        (scores[done] >= config.threshold).astype(np.int64), matrix.y[done], folds, skipped,
    )


def bootstrap_loso(matrix, spec, config=PipelineConfig(), seed=0, iterations=10):
    """Repeat ``run_loso`` with seeds ``seed + i`` and summarise the metrics.

    The standard deviation is the population value across iterations (0 for
    a single iteration).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    per_iter, preds = [], []
    for i in range(iterations):
        res = run_loso(matrix, spec, config, seed + i)
        m = metrics(res.scores, res.truths, config.threshold)
        per_iter.append(m)
        preds.append(res)
        log.info("iteration %d: %s", i, {k: round(v, 4) for k, v in m.items()})
    table = {k: np.array([m[k] for m in per_iter]) for k in METRIC_NAMES}
    mean = {k: float(np.mean(v)) for k, v in table.items()}
    std = {k: float(np.std(v)) for k, v in table.items()}
    snapshot = {"spec": {"kind": spec.kind, "hyperparameters": spec.hyperparameters},
                "pipeline": asdict(config), "seed": seed, "iterations": iterations}
    return EvalReport(per_iter, mean, std, preds, snapshot)


def write_iterations_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", *METRIC_NAMES])
        for i, m in enumerate(report.per_iteration):
            w.writerow([i, *(repr(float(m[k])) for k in METRIC_NAMES)])


def write_summary_csv(rows, path):
    """``rows``: sequence of (phase label, classifier label, days, EvalReport)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "classifier", "days", *METRIC_NAMES])
        for phase, clf, days, report in rows:
            s = report.summary()
            w.writerow([phase, clf, days, *(s[k] for k in METRIC_NAMES)])


def write_predictions_csv(result, path):
    """Day-level predictions of one LOSO run."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "date", "score", "predicted", "truth"])
        for s, d, sc, p, t in zip(result.subjects, result.dates, result.scores, result.predicted, result.truths):
            w.writerow([s, str(d), repr(float(sc)), int(p), int(t)])
