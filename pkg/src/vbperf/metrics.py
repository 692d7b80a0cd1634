"""Binary classification metrics with class 1 as the positive class."""

import numpy as np

METRIC_NAMES = ("accuracy", "f1", "precision", "recall", "auroc", "auprc")


def confusion(truths, predicted):
    t = np.asarray(truths).astype(bool)
    p = np.asarray(predicted).astype(bool)
    return {
        "tp": int(np.sum(t & p)), "fp": int(np.sum(~t & p)),
        "tn": int(np.sum(~t & ~p)), "fn": int(np.sum(t & ~p)),
    }


def _ratio(num, den):
    return num / den if den else 0.0


def _roc_steps(truths, scores):
    """Cumulative (fp, tp) counts at each distinct score, highest first."""
    t = np.asarray(truths).astype(bool)
    s = np.asarray(scores, dtype=float)
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(t)[last]
    fp = np.cumsum(~t)[last]
    return fp, tp


def auroc(truths, scores):
    """Trapezoidal area under the ROC curve; tied scores form one step."""
    fp, tp = _roc_steps(truths, scores)
    n_pos, n_neg = tp[-1], fp[-1]
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    fpr = np.r_[0, fp] / n_neg
    tpr = np.r_[0, tp] / n_pos
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def average_precision(truths, scores):
    """Sum over distinct thresholds of (recall increase) x precision."""
    fp, tp = _roc_steps(truths, scores)
    n_pos = tp[-1]
    if n_pos == 0:
        return float("nan")
    precision = tp / (tp + fp)
    recall = np.r_[0, tp] / n_pos
    return float(np.sum(np.diff(recall) * precision))


def metrics(scores, truths, threshold=0.5):
    """Accuracy, F1, precision, recall, AUROC and AUPRC for one prediction set."""
    scores = np.asarray(scores, dtype=float)
    truths = np.asarray(truths).astype(np.int64)
    pred = scores >= threshold
    c = confusion(truths, pred)
    precision = _ratio(c["tp"], c["tp"] + c["fp"])
    recall = _ratio(c["tp"], c["tp"] + c["fn"])
    return {
        "accuracy": _ratio(c["tp"] + c["tn"], truths.size),
        "f1": _ratio(2 * precision * recall, precision + recall),
        "precision": precision,
        "recall": recall,
        "auroc": auroc(truths, scores),
        "auprc": average_precision(truths, scores),
    }
