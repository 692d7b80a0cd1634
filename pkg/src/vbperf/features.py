"""Per subject-day feature extraction and feature-matrix assembly."""

import csv
import logging
import math
from dataclasses import dataclass, fields
from datetime import timedelta

import numpy as np

from . import ingest
from .timeseries import (
    DFA_WINDOWS, MinuteSeries, approximate_entropy, cooccurrence_stats, dfa, moment_stats,
    sample_entropy,
)

log = logging.getLogger(__name__)

BOUT_MIN = 30
LEVEL_EDGES = (34, 68)  # step-count levels 0-33, 34-67, 68+
DAY_MINUTES = 1440

_MOMENTS = ("mean", "std", "min", "max", "median", "skewness", "kurtosis")
_COOC = ("inertia", "local_homogeneity", "correlation", "energy")

MOVEMENT_FEATURES = (
    "steps_total", "distance_total", "calories_total", "total_sedentary_time",
    "light_activity_minutes", "active_minutes", "sedentary_bout_count", "sedentary_bout_mean",
    "sedentary_bout_std", "sedentary_break_total", "sedentary_break_mean", "sedentary_break_std",
)
SLEEP_FEATURES = (
    "sleep_deep_minutes", "sleep_light_minutes", "sleep_rem_minutes", "sleep_wake_minutes",
    "total_sleep_time", "time_in_bed", "sleep_efficiency",
    *(f"dfa_sleep_{n}" for n in DFA_WINDOWS), "sleep_hurst",
)
CARDIO_FEATURES = (
    *(f"hr_{k}" for k in _MOMENTS), *(f"hr_dfa_{n}" for n in DFA_WINDOWS), "hr_hurst",
    *(f"hr_{k}" for k in _COOC), "hr_sample_entropy", "hr_approximate_entropy",
    "hrv", "rhr", "hrv_change", "rhr_change",
)
RESPIRATORY_FEATURES = (
    *(f"spo2_{k}" for k in _MOMENTS), *(f"spo2_dfa_{n}" for n in DFA_WINDOWS), "spo2_hurst",
    "breathing_rate", "vo2max",
)
FEATURES = MOVEMENT_FEATURES + SLEEP_FEATURES + CARDIO_FEATURES + RESPIRATORY_FEATURES

DISPLAY_NAMES = {
    "hrv": "HRV",
    "breathing_rate": "Breathing Rate",
    "total_sedentary_time": "Total Sedentary Time",
    "hrv_change": "HRV Change",
    "hr_skewness": "HR Skewness",
    "sleep_efficiency": "Sleep Efficiency",
    "vo2max": "VO2max",
    "sedentary_break_total": "Sedentary Break Total",
    "sedentary_break_std": "Sedentary Break Std.",
    "hr_min": "Heart Rate Min.",
    "hr_median": "Heart Rate Median",
    "sedentary_bout_std": "Sedentary Bout Std.",
    "spo2_skewness": "SpO2 Skewness",
    "spo2_hurst": "SpO2 Hurst Exp.",
    "spo2_std": "SpO2 Std.",
    "spo2_min": "SpO2 Min.",
    "rhr_change": "RHR Change",
    "sleep_light_minutes": "Light Sleep Duration",
    **{f"dfa_sleep_{n}": f"DFA-Sleep-{n}" for n in DFA_WINDOWS},
    **{f"spo2_dfa_{n}": f"SpO2-DFA-{n}" for n in DFA_WINDOWS},
    **{f"hr_dfa_{n}": f"HR-DFA-{n}" for n in DFA_WINDOWS},
}


_ACRONYMS = {"Hr": "HR", "Hrv": "HRV", "Rhr": "RHR", "Spo2": "SpO2", "Dfa": "DFA"}


def display_name(feature):
    if feature in DISPLAY_NAMES:
        return DISPLAY_NAMES[feature]
    words = feature.replace("_", " ").title().split()
    return " ".join(_ACRONYMS.get(w, w) for w in words)


@dataclass
class DayFeatureRow:
    subject_id: str
    date: object
    phase_id: int
    values: dict
    mask: dict  # feature -> True when present


@dataclass
class FeatureMatrix:
    """Rows of subject-days against a fixed, ordered feature schema (NaN = missing)."""

    subjects: np.ndarray
    dates: np.ndarray
    phases: np.ndarray
    X: np.ndarray
    feature_names: tuple = FEATURES

    def __post_init__(self):
        self.subjects = np.asarray(self.subjects, dtype=object)
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.phases = np.asarray(self.phases, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.subjects), len(self.feature_names))
        self.feature_names = tuple(self.feature_names)

    def __len__(self):
        return len(self.subjects)

    @classmethod
    def empty(cls, feature_names=FEATURES):
        return cls(np.empty(0, dtype=object), np.empty(0, dtype="datetime64[D]"),
                   np.empty(0, dtype=np.int64), np.empty((0, len(feature_names))), feature_names)

    def _kwargs(self, idx):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v[idx] if isinstance(v, np.ndarray) else v
        return out

    def take(self, idx):
        return type(self)(**self._kwargs(np.asarray(idx, dtype=np.int64)))

    def column(self, name):
        return self.X[:, self.feature_names.index(name)]

    def with_features(self, names):
        idx = [self.feature_names.index(n) for n in names]
        kw = self._kwargs(slice(None))
        kw["X"] = self.X[:, idx]
        kw["feature_names"] = tuple(names)
        return type(self)(**kw)

    def unique_subjects(self):
        return sorted(set(self.subjects))

    def rows(self):
        for i in range(len(self)):
            vals = dict(zip(self.feature_names, self.X[i].tolist()))
            yield DayFeatureRow(
                self.subjects[i], ingest.to_date(self.dates[i]), int(self.phases[i]), vals,
                {k: math.isfinite(v) for k, v in vals.items()},
            )


@dataclass
class LabeledMatrix(FeatureMatrix):
    y: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        if self.y is None:
            raise ValueError("LabeledMatrix needs labels")
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.y.shape != (len(self.subjects),):
            raise ValueError("one label per row required")

    @classmethod
    def from_matrix(cls, matrix, y):
        return cls(matrix.subjects, matrix.dates, matrix.phases, matrix.X, matrix.feature_names, y)


# ---------------------------------------------------------------- movement


def _runs(flags):
    """(start, length) of maximal True runs."""
    padded = np.concatenate([[False], flags, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, stops = edges[::2], edges[1::2]
    return starts, stops - starts


def activity_levels(steps):
    return np.digitize(steps, LEVEL_EDGES)


def movement_features(steps, distance=None, calories=None, bout_min=BOUT_MIN):
    """Daily movement aggregates and sedentary bout / break structure.

    Parameters
    ----------
    steps, distance, calories : MinuteSeries or array_like
        Per-minute values; NaN marks a missing minute.
    bout_min : int
        Minimum run of zero-step minutes counted as a sedentary bout.

    Returns
    -------
    dict
        Values for every name in ``MOVEMENT_FEATURES``.
    """
    out = dict.fromkeys(MOVEMENT_FEATURES, float("nan"))
    s = _values(steps)
    present = np.isfinite(s)
    if distance is not None:
        d = _values(distance)
        if np.isfinite(d).any():
            out["distance_total"] = float(np.nansum(d))
    if calories is not None:
        c = _values(calories)
        if np.isfinite(c).any():
            out["calories_total"] = float(np.nansum(c))
    if not present.any():
        out["distance_total"] = out["calories_total"] = float("nan")
        return out
    levels = np.where(present, activity_levels(np.where(present, s, 0.0)), -1)
    out["steps_total"] = float(np.nansum(s))
    out["total_sedentary_time"] = float(np.count_nonzero(levels == 0))
    out["light_activity_minutes"] = float(np.count_nonzero(levels == 1))
    out["active_minutes"] = float(np.count_nonzero(levels == 2))

    starts, lengths = _runs(present & (s == 0))
    keep = lengths >= bout_min
    starts, lengths = starts[keep], lengths[keep]
    out["sedentary_bout_count"] = float(lengths.size)
    if lengths.size:
        out["sedentary_bout_mean"] = float(lengths.mean())
        out["sedentary_bout_std"] = float(np.std(lengths / s.size))
    after = starts + lengths
    after = after[after < s.size]
    after = after[present[after]]
    breaks = levels[after]
    out["sedentary_break_total"] = float(breaks.size)
    if breaks.size:
        out["sedentary_break_mean"] = float(breaks.mean())
        out["sedentary_break_std"] = float(np.std(breaks))
    return out


def _values(series):
    if isinstance(series, MinuteSeries):
        return np.where(series.missing, np.nan, series.values)
    return np.asarray(series, dtype=float)


# ---------------------------------------------------------------- sleep


def _log_fluct(result, prefix):
    out = {f"{prefix}{n}": float("nan") for n in DFA_WINDOWS}
    for n, f in zip(result.window_sizes, result.fluctuations):
        out[f"{prefix}{int(n)}"] = float(np.log(f))
    return out


def sleep_features(event=None, stages=None):
    """Stage durations, efficiency and DFA of the coded stage series.

    Parameters
    ----------
    event : SleepEvent, optional
        The night's sleep event; ``None`` makes every sleep feature missing.
    stages : MinuteSeries, optional
        Minute-coded stages; derived from ``event`` when omitted.
    """
    out = dict.fromkeys(SLEEP_FEATURES, float("nan"))
    if event is None and stages is None:
        return out
    if stages is None:
        n = int(math.ceil(event.minutes))
        stages = ingest.resample_minutes(event.start, n, segments=event.segments)
    codes = stages.present()
    if codes.size == 0:
        return out
    for name, code in ingest.STAGE_CODES.items():
        out[f"sleep_{name}_minutes"] = float(np.count_nonzero(codes == code))
    asleep = float(np.count_nonzero(codes != ingest.STAGE_CODES["wake"]))
    out["total_sleep_time"] = asleep
    out["time_in_bed"] = float(codes.size)
    out["sleep_efficiency"] = 100.0 * asleep / codes.size
    res = dfa(codes)
    out.update(_log_fluct(res, "dfa_sleep_"))
    out["sleep_hurst"] = res.hurst
    return out


# ---------------------------------------------------------------- cardio / respiratory


def _change(today, yesterday):
    if today is None or yesterday is None:
        return float("nan")
    return today - yesterday


def _nan_if_none(v):
    return float("nan") if v is None else float(v)


def cardio_features(hr_samples, hr_minutes, hrv=None, hrv_prev=None, rhr=None, rhr_prev=None,
                    levels=8):
    """Heart-rate distribution, DFA, co-occurrence and entropy plus daily HRV/RHR.

    ``hr_samples`` are the raw readings of the day (used for the moments);
    ``hr_minutes`` is the one-minute grid used by the sequence statistics.
    ``*_prev`` are the values of the immediately preceding calendar day.
    """
    out = dict.fromkeys(CARDIO_FEATURES, float("nan"))
    raw = np.asarray(hr_samples, dtype=float)
    if raw.size:
        out.update({f"hr_{k}": v for k, v in moment_stats(raw).items()})
    if hr_minutes is not None and hr_minutes.present().size:
        res = dfa(hr_minutes)
        out.update(_log_fluct(res, "hr_dfa_"))
        out["hr_hurst"] = res.hurst
        if hr_minutes.present().size >= 2:
            out.update({f"hr_{k}": v for k, v in cooccurrence_stats(hr_minutes, levels).items()})
        out["hr_sample_entropy"] = sample_entropy(hr_minutes)
        out["hr_approximate_entropy"] = approximate_entropy(hr_minutes)
    out["hrv"] = _nan_if_none(hrv)
    out["rhr"] = _nan_if_none(rhr)
    out["hrv_change"] = _change(hrv, hrv_prev)
    out["rhr_change"] = _change(rhr, rhr_prev)
    return out


def respiratory_features(spo2_minutes, breathing_rate=None, vo2max=None):
    """SpO2 distribution, DFA and Hurst exponent plus daily breathing rate and VO2max."""
    out = dict.fromkeys(RESPIRATORY_FEATURES, float("nan"))
    if spo2_minutes is not None and spo2_minutes.present().size:
        out.update({f"spo2_{k}": v for k, v in moment_stats(spo2_minutes).items()})
        res = dfa(spo2_minutes)
        out.update(_log_fluct(res, "spo2_dfa_"))
        out["spo2_hurst"] = res.hurst
    out["breathing_rate"] = _nan_if_none(breathing_rate)
    out["vo2max"] = _nan_if_none(vo2max)
    return out


# ---------------------------------------------------------------- assembly


def _main_sleep(subject, tz):
    by_day = {}
    for ev in subject.sleep:
        d = ingest.sleep_date(ev, tz)
        if d not in by_day or ev.minutes > by_day[d].minutes:
            by_day[d] = ev
    return by_day


def subject_day_rows(subject, days, tz="UTC", bout_min=BOUT_MIN, levels=8):
    """Feature dictionaries for the given local days of one subject."""
    per_metric = {m: ingest.split_by_day(subject.stream(m), tz) for m in ingest.METRICS}
    sleep_by_day = _main_sleep(subject, tz)
    empty = (np.empty(0), np.empty(0))
    spo2 = subject.stream("spo2")
    rows = []
    for day in days:
        start = ingest.day_start(day, tz)

        def grid(metric):
            return ingest.resample_minutes(start, DAY_MINUTES, samples=per_metric[metric].get(day, empty))

        feats = {}
        feats.update(movement_features(grid("steps"), grid("distance"), grid("calories"), bout_min))
        event = sleep_by_day.get(day)
        feats.update(sleep_features(event))
        hr_ts, hr_vals = per_metric["heart_rate"].get(day, empty)
        prev = day - timedelta(days=1)
        daily = subject.daily
        feats.update(cardio_features(
            hr_vals, grid("heart_rate") if hr_vals.size else None,
            daily.get((day, "hrv_rmssd_ms")), daily.get((prev, "hrv_rmssd_ms")),
            daily.get((day, "rhr_bpm")), daily.get((prev, "rhr_bpm")), levels,
        ))
        if event is not None:
            n = int(math.ceil(event.minutes))
            lo = np.searchsorted(spo2.timestamps, event.start)
            hi = np.searchsorted(spo2.timestamps, event.end)
            spo2_grid = ingest.resample_minutes(
                event.start, n, samples=(spo2.timestamps[lo:hi], spo2.values[lo:hi]))
        else:
            spo2_grid = grid("spo2")
        feats.update(respiratory_features(
            spo2_grid, daily.get((day, "breathing_rate_rpm")), daily.get((day, "vo2max"))))
        rows.append(feats)
    return rows


def build_matrix(dataset, phase_ids, phase_config=None, bout_min=BOUT_MIN, levels=8):
    """One row per (compliant) sensor day of every subject inside ``phase_ids``.

    Rows are ordered by subject id then date; the column schema is always
    ``FEATURES``.
    """
    phase_config = phase_config or ingest.PhaseConfig(timezone=dataset.timezone)
    wanted = set(phase_ids)
    tz = dataset.timezone
    subjects, dates, phases, values = [], [], [], []
    if not wanted:
        return FeatureMatrix.empty()
    for subj in dataset:
        days = []
        for d in sorted(ingest.sensor_days(subj, tz)):
            pid = ingest.assign_phase(d, phase_config)
            if pid in wanted:
                days.append((d, pid))
        if not days:
            continue
        rows = subject_day_rows(subj, [d for d, _ in days], tz, bout_min, levels)
        for (d, pid), feats in zip(days, rows):
            subjects.append(subj.subject_id)
            dates.append(np.datetime64(d, "D"))
            phases.append(pid)
            values.append([feats[f] for f in FEATURES])
        log.debug("featurized %d days of %s", len(days), subj.subject_id)
    if not subjects:
        return FeatureMatrix.empty()
    return FeatureMatrix(np.array(subjects, dtype=object), np.array(dates), np.array(phases),
                         np.array(values, dtype=float), FEATURES)


def _cell(v):
    return "" if not math.isfinite(v) else repr(float(v))


def write_matrix_csv(matrix, path):
    """CSV with header ``subject,date,phase,<features...>``; missing cells are empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        extra = ["class"] if isinstance(matrix, LabeledMatrix) else []
        w.writerow(["subject", "date", "phase", *matrix.feature_names, *extra])
        for i in range(len(matrix)):
            row = [matrix.subjects[i], str(matrix.dates[i]), int(matrix.phases[i])]
            row += [_cell(v) for v in matrix.X[i]]
            if extra:
                row.append(int(matrix.y[i]))
            w.writerow(row)


def read_matrix_csv(path):
    """Inverse of ``write_matrix_csv``; returns a LabeledMatrix when a class column exists."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["subject", "date", "phase"]:
            raise ValueError(f"{path}: not a feature matrix file")
        labeled = header[-1] == "class"
        names = header[3:-1] if labeled else header[3:]
        subjects, dates, phases, X, y = [], [], [], [], []
        for row in reader:
            subjects.append(row[0])
            dates.append(np.datetime64(row[1], "D"))
            phases.append(int(row[2]))
            cells = row[3:3 + len(names)]
            X.append([float(c) if c else float("nan") for c in cells])
            if labeled:
                y.append(int(row[-1]))
    n = len(subjects)
    base = FeatureMatrix(np.array(subjects, dtype=object), np.array(dates, dtype="datetime64[D]"),
                         np.array(phases, dtype=np.int64), np.array(X, dtype=float).reshape(n, len(names)),
                         tuple(names))
    return LabeledMatrix.from_matrix(base, y) if labeled else base
