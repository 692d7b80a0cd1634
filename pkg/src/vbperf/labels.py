"""Hit percentage, season averages and the binary performance class."""

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np

log = logging.getLogger(__name__)

HIT_THRESHOLD = 0.2
GOOD, POOR = 0, 1

POSITIONS = ("outside", "middle", "setter", "libero", "other")

# official box-score columns besides date and position, in file order
BOX_METRICS = (
    "kills", "errors", "attempts", "points", "digs", "assists", "service_aces",
    "service_errors", "reception_errors", "block_solos", "block_errors",
    "ball_handling_errors", "total_attempts",
)


@dataclass(frozen=True)
class BoxScore:
    subject_id: str
    date: date
    kills: int
    errors: int
    attempts: int
    position: str = "other"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("kills", "errors", "attempts"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.kills > self.attempts or self.errors > self.attempts:
            raise ValueError("kills and errors cannot exceed attempts")
        if self.position not in POSITIONS:
            raise ValueError(f"unknown position {self.position!r}")
        if any(v < 0 for v in self.extra.values()):
            raise ValueError("box-score counts must be non-negative")

    def metric(self, name):
        if name in ("kills", "errors", "attempts"):
            return getattr(self, name)
        return self.extra.get(name)

    @property
    def hit_percentage(self):
        return hit_percentage(self.kills, self.errors, self.attempts)


@dataclass(frozen=True)
class SeasonLabel:
    subject_id: str
    season_hit_avg: float
    label: int
    n_matches: int = 0


def hit_percentage(kills, errors, attempts):
    """(kills - errors) / attempts; NaN when there were no attempts."""
    if attempts <= 0:
        return float("nan")
    return (kills - errors) / attempts


def season_average(scores, weighting="match"):
    """Season hit average over matches with at least one attempt.

    Parameters
    ----------
    scores : iterable of BoxScore
    weighting : {"match", "attempts"}
        ``"match"`` averages per-match hit percentages with equal weight;
        ``"attempts"`` pools kills, errors and attempts over the season.

    Returns
    -------
    float
        NaN when no match has attempts (the subject is then unlabeled).
    """
    valid = [s for s in scores if s.attempts > 0]
    if not valid:
        return float("nan")
    if weighting == "match":
        return float(np.mean([s.hit_percentage for s in valid]))
    if weighting == "attempts":
        return hit_percentage(
            sum(s.kills for s in valid), sum(s.errors for s in valid), sum(s.attempts for s in valid)
        )
    raise ValueError(f"unknown weighting {weighting!r}")


def binarize(season_avg, threshold=HIT_THRESHOLD):
    """0 (good) strictly above ``threshold``, otherwise 1 (poor)."""
    if math.isnan(season_avg):
        raise ValueError("cannot binarize a missing season average")
    return GOOD if season_avg > threshold else POOR


def season_labels(boxscores, threshold=HIT_THRESHOLD, weighting="match"):
    """Labels for every subject with at least one valid match.

    Parameters
    ----------
    boxscores : mapping of subject id to a sequence of BoxScore

    Returns
    -------
    dict
        Subject id to SeasonLabel, ordered by subject id.
    """
    out = {}
    for subject in sorted(boxscores):
        scores = boxscores[subject]
        avg = season_average(scores, weighting)
        if math.isnan(avg):
            log.info("subject %s has no match with attempts; left unlabeled", subject)
            continue
        n = sum(1 for s in scores if s.attempts > 0)
        out[subject] = SeasonLabel(subject, avg, binarize(avg, threshold), n)
    return out


def label_matrix(matrix, labels):
    """Attach each row's subject class; rows of unlabeled subjects are dropped.

    Returns
    -------
    (LabeledMatrix, dict)
        The labeled matrix and a report ``{"dropped_subjects": {...: n_rows}}``.
    """
    from .features import LabeledMatrix

    keep = np.array([s in labels for s in matrix.subjects], dtype=bool)
    dropped = {}
    for s in matrix.subjects[~keep]:
        dropped[s] = dropped.get(s, 0) + 1
    if dropped:
        log.warning("dropping %d rows of %d unlabeled subjects", int((~keep).sum()), len(dropped))
    sub = matrix.take(np.flatnonzero(keep))
    y = np.array([labels[s].label for s in sub.subjects], dtype=np.int64)
    return LabeledMatrix.from_matrix(sub, y), {"dropped_subjects": dropped}


def write_labels_csv(labels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "season_hit_avg", "class"])
        for lab in labels.values():
            w.writerow([lab.subject_id, repr(float(lab.season_hit_avg)), lab.label])
