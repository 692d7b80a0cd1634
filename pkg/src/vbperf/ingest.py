"""File-based ingestion, compliance filtering and season-phase tagging.

Directory layout under a dataset root::

    streams/<subject>/<metric>.csv   timestamp,value        (RFC-3339 timestamps)
    daily/<subject>.csv              date,kind,value
    sleep/<subject>.jsonl            {"start", "end", "segments": [{"stage", "start", "end"}]}
    ema/<subject>.csv                timestamp,item,score
    boxscores/<subject>.csv          date,kills,errors,attempts,...,position

A missing file means missing data for that subject, never an error.  Rows
that fail validation are dropped and reported as diagnostics.
"""

import csv
import json
import logging
import math
import sys
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path

import numpy as np
import pandas as pd

from .labels import BOX_METRICS, POSITIONS, BoxScore
from .timeseries import STAGE_CODES, MinuteSeries

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METRICS = ("steps", "distance", "calories", "heart_rate", "spo2")
DAILY_KINDS = ("hrv_rmssd_ms", "rhr_bpm", "breathing_rate_rpm", "vo2max")
EMA_ITEMS = (
    "injury_risk", "readiness", "recovery", "soreness", "tiredness",
    "mood", "stress", "sleep_quality", "performance", "productivity",
)
SLEEP_STAGES = tuple(STAGE_CODES)
MIN_HR_READINGS = 8768  # 0.7 * 1440 min * 8.5 readings/min

_RANGES = {
    "heart_rate": (20.0, 250.0),
    "spo2": (50.0, 100.0),
    "steps": (0.0, math.inf),
    "distance": (0.0, math.inf),
    "calories": (0.0, math.inf),
}

# inclusive date ranges; Table I boundary days belong to the later phase
TABLE_I_PHASES = (
    (1, date(2022, 10, 23), date(2022, 11, 17)),
    (2, date(2022, 11, 18), date(2023, 1, 2)),
    (3, date(2023, 1, 3), date(2023, 1, 12)),
    (4, date(2023, 1, 13), date(2023, 4, 28)),
)


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    message: str

    def __str__(self):
        return f"{self.path}:{self.line}: {self.message}"


@dataclass
class SampleStream:
    subject_id: str
    metric: str
    timestamps: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.timestamps.shape != self.values.shape:
            raise ValueError("timestamps and values differ in length")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("stream values must be finite")
        lo, hi = _RANGES[self.metric]
        if np.any((self.values < lo) | (self.values > hi)):
            raise ValueError(f"{self.metric} values out of range [{lo}, {hi}]")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DailyScalar:
    subject_id: str
    date: date
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in DAILY_KINDS:
            raise ValueError(f"unknown daily kind {self.kind!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValueError("daily values must be finite and positive")


@dataclass(frozen=True)
class SleepEvent:
    subject_id: str
    start: float
    end: float
    segments: tuple  # of (stage, start, end), UTC seconds

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError("sleep event must have positive duration")
        if not self.segments:
            raise ValueError("sleep event without segments")
        cursor = self.start
        for stage, s, e in self.segments:
            if stage not in STAGE_CODES:
                raise ValueError(f"unknown sleep stage {stage!r}")
            if s != cursor or not e > s:
                raise ValueError("sleep segments must be contiguous and non-overlapping")
            cursor = e
        if cursor != self.end:
            raise ValueError("sleep segments must cover the whole event")

    @property
    def minutes(self):
        return (self.end - self.start) / 60.0


@dataclass(frozen=True)
class EmaResponse:
    subject_id: str
    timestamp: float
    item: str
    score: int

    def __post_init__(self):
        if self.item not in EMA_ITEMS:
            raise ValueError(f"unknown EMA item {self.item!r}")
        if not 1 <= self.score <= 7:
            raise ValueError("EMA scores lie in [1, 7]")


@dataclass(frozen=True)
class PhaseConfig:
    """Ordered season phases as inclusive date ranges plus the cohort timezone."""

    phases: tuple = TABLE_I_PHASES
    timezone: str = "UTC"

    def __post_init__(self):
        prev_end = None
        ids = [p[0] for p in self.phases]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate phase ids")
        for pid, start, end in self.phases:
            if pid not in (1, 2, 3, 4):
                raise ValueError(f"phase id {pid} outside 1..4")
            if end < start:
                raise ValueError(f"phase {pid} ends before it starts")
            if prev_end is not None and start <= prev_end:
                raise ValueError("phases must be ordered and non-overlapping")
            prev_end = end


@dataclass
class SubjectData:
    subject_id: str
    streams: dict = field(default_factory=dict)
    daily: dict = field(default_factory=dict)  # (date, kind) -> value
    sleep: list = field(default_factory=list)
    ema: list = field(default_factory=list)
    boxscores: list = field(default_factory=list)

    def stream(self, metric):
        s = self.streams.get(metric)
        return s if s is not None else SampleStream(self.subject_id, metric)


@dataclass
class SubjectDataset:
    subjects: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    timezone: str = "UTC"

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects.values())

    def subject_ids(self):
        return list(self.subjects)


@dataclass
class ExclusionReport:
    excluded: dict = field(default_factory=dict)  # subject -> sorted dates
    retained: dict = field(default_factory=dict)

    def counts(self):
        return {
            s: (len(self.excluded.get(s, ())), len(self.retained.get(s, ())))
            for s in sorted(set(self.excluded) | set(self.retained))
        }


# ---------------------------------------------------------------- time helpers


def _parse_utc_fast(values):
    """Canonical ``YYYY-MM-DDTHH:MM:SSZ`` strings via numpy; None if any differs."""
    try:
        arr = np.asarray(values, dtype="U21")
    except (TypeError, ValueError):
        return None
    if arr.size == 0:
        return None
    chars = arr.view(np.uint32).reshape(arr.size, 21)
    if not ((chars[:, 19] == ord("Z")).all() and (chars[:, 20] == 0).all() and (chars[:, 10] == ord("T")).all()):
        return None
    try:
        stamps = np.ascontiguousarray(chars[:, :19]).view("U19").ravel().astype("datetime64[s]")
    except ValueError:
        return None
    if np.isnat(stamps).any():
        return None
    return stamps.astype(np.int64).astype(float)


def parse_timestamps(text):
    """RFC-3339 strings to UTC seconds (NaN where unparseable)."""
    ser = pd.Series(text, dtype=object)
    fast = _parse_utc_fast(ser.to_numpy())
    if fast is not None:
        return fast
    ts = pd.to_datetime(ser, utc=True, format="ISO8601", errors="coerce")
    out = np.full(len(ts), np.nan)
    ok = ts.notna().to_numpy()
    out[ok] = ts[ok].astype("int64").to_numpy() / 1e9
    return out


def format_timestamp(seconds):
    return datetime.utcfromtimestamp(seconds).strftime("%Y-%m-%dT%H:%M:%SZ")


def local_dates(timestamps, tz="UTC"):
    """Local calendar day and seconds since local midnight for UTC seconds."""
    ts = np.asarray(timestamps, dtype=float)
    if ts.size == 0:
        return np.empty(0, dtype="datetime64[D]"), np.empty(0)
    if tz in ("UTC", "Etc/UTC"):
        whole = np.floor(ts / 86400.0)
        return whole.astype("datetime64[D]"), ts - whole * 86400.0
    idx = pd.to_datetime(ts, unit="s", utc=True).tz_convert(tz)
    naive = idx.tz_localize(None).to_numpy()
    days = naive.astype("datetime64[D]")
    secs = (naive - days).astype("timedelta64[ns]").astype(np.int64) / 1e9
    return days, secs


def day_start(day, tz="UTC"):
    """UTC seconds of local midnight starting ``day``."""
    ts = pd.Timestamp(np.datetime64(day, "D"))
    ts = ts.tz_localize(tz)
    return ts.value / 1e9


def to_date(day):
    if isinstance(day, date):
        return day
    return np.datetime64(day, "D").astype(object)


def split_by_day(stream, tz="UTC"):
    """Dictionary of local date -> (timestamps, values) slices of a stream."""
    if len(stream) == 0:
        return {}
    days, _ = local_dates(stream.timestamps, tz)
    cut = np.flatnonzero(days[1:] != days[:-1]) + 1
    bounds = np.concatenate([[0], cut, [days.size]])
    out = {}
    for a, b in zip(bounds[:-1], bounds[1:]):
        out[to_date(days[a])] = (stream.timestamps[a:b], stream.values[a:b])
    return out


def sleep_date(event, tz="UTC"):
    """Sleep is attributed to the local date on which it ends."""
    days, _ = local_dates([event.end], tz)
    return to_date(days[0])


# ---------------------------------------------------------------- phases


def load_phase_config(path):
    """Read a TOML phase file.

    Example::

        timezone = "UTC"
        [phases]
        1 = { start = 2022-10-23, end = 2022-11-17 }
        2 = { start = 2022-11-18, end = 2023-01-02 }
    """
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return phase_config_from_dict(doc)


def phase_config_from_dict(doc):
    raw = doc.get("phases")
    if not raw:
        raise ValueError("phase config has no [phases] table")
    phases = []
    for key, rng in raw.items():
        start, end = rng["start"], rng["end"]
        if isinstance(start, str):
            start = date.fromisoformat(start)
        if isinstance(end, str):
            end = date.fromisoformat(end)
        phases.append((int(key), start, end))
    phases.sort(key=lambda p: p[1])
    return PhaseConfig(tuple(phases), doc.get("timezone", "UTC"))


def dump_phase_config(config):
    lines = [f'timezone = "{config.timezone}"', "", "[phases]"]
    for pid, start, end in config.phases:
        lines.append(f"{pid} = {{ start = {start.isoformat()}, end = {end.isoformat()} }}")
    return "\n".join(lines) + "\n"


def assign_phase(day, config=PhaseConfig()):
    """Phase id whose inclusive range contains ``day``, or None."""
    day = to_date(day)
    for pid, start, end in config.phases:
        if start <= day <= end:
            return pid
    return None


def parse_phase_selection(text):
    """'1,2,3' -> (1, 2, 3); rejects empty, duplicate or unknown ids."""
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("empty phase selection")
    try:
        ids = tuple(sorted(int(p) for p in parts))
    except ValueError:
        raise ValueError(f"bad phase selection {text!r}") from None
    if len(set(ids)) != len(ids) or not set(ids) <= {1, 2, 3, 4}:
        raise ValueError(f"bad phase selection {text!r}")
    return ids


# ---------------------------------------------------------------- loading


def _read_rows(path, header, diagnostics):
    """CSV rows as dicts with their 1-based line numbers; header mismatch is fatal for the file."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            return []
        if [h.strip() for h in first] != list(header):
            diagnostics.append(Diagnostic(str(path), 1, f"expected header {','.join(header)}"))
            return []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                diagnostics.append(Diagnostic(str(path), lineno, "wrong field count"))
                continue
            rows.append((lineno, dict(zip(header, row))))
        return rows


def _load_stream(path, subject, metric, diagnostics):
    try:
        frame = pd.read_csv(path, dtype={"timestamp": str}, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return SampleStream(subject, metric)
    if list(frame.columns) != ["timestamp", "value"]:
        diagnostics.append(Diagnostic(str(path), 1, "expected header timestamp,value"))
        return SampleStream(subject, metric)
    ts = parse_timestamps(frame["timestamp"].to_numpy())
    vals = frame["value"]
    if vals.dtype.kind not in "if":
        vals = pd.to_numeric(vals, errors="coerce")
    vals = vals.to_numpy(dtype=float)
    lo, hi = _RANGES[metric]
    bad_ts = ~np.isfinite(ts)
    bad_val = ~np.isfinite(vals)
    bad_rng = ~bad_val & ((vals < lo) | (vals > hi))
    ok = ~(bad_ts | bad_val | bad_rng)
    # strictly increasing: drop anything not after every earlier accepted row
    prev_max = np.maximum.accumulate(np.where(ok, ts, -np.inf))
    prev_max = np.concatenate([[-np.inf], prev_max[:-1]])
    bad_order = ok & (ts <= prev_max)
    ok &= ~bad_order
    if not ok.all():
        for i in np.flatnonzero(~ok):
            if bad_ts[i]:
                msg = "unparseable timestamp"
            elif bad_val[i]:
                msg = "non-numeric value"
            elif bad_rng[i]:
                msg = f"{metric} value {vals[i]:g} outside [{lo:g}, {hi:g}]"
            else:
                msg = "timestamp not strictly increasing"
            diagnostics.append(Diagnostic(str(path), int(i) + 2, msg))
    return SampleStream(subject, metric, ts[ok], vals[ok])


def _load_daily(path, subject, diagnostics):
    out = {}
    for lineno, row in _read_rows(path, ("date", "kind", "value"), diagnostics):
        try:
            rec = DailyScalar(subject, date.fromisoformat(row["date"]), row["kind"], float(row["value"]))
        except ValueError as exc:
            diagnostics.append(Diagnostic(str(path), lineno, str(exc)))
            continue
        key = (rec.date, rec.kind)
        if key in out:
            diagnostics.append(Diagnostic(str(path), lineno, f"duplicate {rec.kind} on {rec.date}"))
            continue
        out[key] = rec.value
    return out


def _load_sleep(path, subject, diagnostics):
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                start, end = parse_timestamps([doc["start"], doc["end"]])
                seg_times = parse_timestamps(
                    [t for seg in doc["segments"] for t in (seg["start"], seg["end"])]
                )
                if not np.all(np.isfinite(np.r_[start, end, seg_times])):
                    raise ValueError("unparseable timestamp")
                segments = tuple(
                    (seg["stage"], float(seg_times[2 * i]), float(seg_times[2 * i + 1]))
                    for i, seg in enumerate(doc["segments"])
                )
                events.append(SleepEvent(subject, float(start), float(end), segments))
            except (ValueError, KeyError, TypeError) as exc:
                diagnostics.append(Diagnostic(str(path), lineno, f"bad sleep event: {exc}"))
    events.sort(key=lambda e: e.start)
    return events


def _load_ema(path, subject, diagnostics):
    rows = _read_rows(path, ("timestamp", "item", "score"), diagnostics)
    if not rows:
        return []
    stamps = parse_timestamps([r["timestamp"] for _, r in rows])
    out = []
    for (lineno, row), ts in zip(rows, stamps):
        try:
            if not math.isfinite(ts):
                raise ValueError("unparseable timestamp")
            score = int(row["score"])
            out.append(EmaResponse(subject, float(ts), row["item"], score))
        except ValueError as exc:
            diagnostics.append(Diagnostic(str(path), lineno, str(exc)))
    out.sort(key=lambda r: (r.timestamp, r.item))
    return out


BOX_HEADER = ("date",) + BOX_METRICS + ("position",)


def _load_boxscores(path, subject, diagnostics):
    out = []
    for lineno, row in _read_rows(path, BOX_HEADER, diagnostics):
        try:
            counts = {k: int(row[k]) for k in BOX_METRICS}
            extra = {k: v for k, v in counts.items() if k not in ("kills", "errors", "attempts")}
            out.append(BoxScore(
                subject, date.fromisoformat(row["date"]), counts["kills"], counts["errors"],
                counts["attempts"], row["position"].strip().lower(), extra,
            ))
        except ValueError as exc:
            diagnostics.append(Diagnostic(str(path), lineno, str(exc)))
    out.sort(key=lambda b: b.date)
    return out


def _discover_subjects(root):
    found = set()
    streams = root / "streams"
    if streams.is_dir():
        found.update(p.name for p in streams.iterdir() if p.is_dir())
    for sub, suffix in (("daily", ".csv"), ("sleep", ".jsonl"), ("ema", ".csv"), ("boxscores", ".csv")):
        d = root / sub
        if d.is_dir():
            found.update(p.name[: -len(suffix)] for p in d.iterdir() if p.name.endswith(suffix))
    return sorted(found)


def load_subject(root, subject, diagnostics):
    root = Path(root)
    data = SubjectData(subject)
    for metric in METRICS:
        path = root / "streams" / subject / f"{metric}.csv"
        if path.is_file():
            data.streams[metric] = _load_stream(path, subject, metric, diagnostics)
    loaders = (
        ("daily", root / "daily" / f"{subject}.csv", _load_daily),
        ("sleep", root / "sleep" / f"{subject}.jsonl", _load_sleep),
        ("ema", root / "ema" / f"{subject}.csv", _load_ema),
        ("boxscores", root / "boxscores" / f"{subject}.csv", _load_boxscores),
    )
    for attr, path, loader in loaders:
        if path.is_file():
            setattr(data, attr, loader(path, subject, diagnostics))
    return data


def load_dataset(root, schema_version=SCHEMA_VERSION, timezone="UTC"):
    """Load every subject found under ``root``.

    Parameters
    ----------
    root : path-like
        Dataset root holding ``streams/``, ``daily/``, ``sleep/``, ``ema/``
        and ``boxscores/``.
    schema_version : int
        Only version 1 exists.
    timezone : str
        IANA zone defining calendar days for the whole cohort.

    Returns
    -------
    SubjectDataset
        Subjects ordered by id; ``diagnostics`` lists every rejected row.
    """
    if schema_version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {schema_version}")
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    diagnostics = []
    subjects = {}
    for subject in _discover_subjects(root):
        subjects[subject] = load_subject(root, subject, diagnostics)
    for d in diagnostics:
        log.debug("%s", d)
    if diagnostics:
        log.warning("%d rows rejected while loading %s", len(diagnostics), root)
    return SubjectDataset(subjects, diagnostics, timezone)


# ---------------------------------------------------------------- compliance


def sensor_days(subject, tz="UTC"):
    """All local dates on which any wearable record exists for ``subject``."""
    days = set()
    for stream in subject.streams.values():
        if len(stream):
            d, _ = local_dates(stream.timestamps, tz)
            days.update(to_date(x) for x in np.unique(d))
    days.update(k[0] for k in subject.daily)
    days.update(sleep_date(e, tz) for e in subject.sleep)
    return days


def hr_reading_counts(subject, tz="UTC"):
    stream = subject.streams.get("heart_rate")
    if stream is None or len(stream) == 0:
        return {}
    d, _ = local_dates(stream.timestamps, tz)
    # timestamps are sorted, so each day is one contiguous run
    cut = np.flatnonzero(d[1:] != d[:-1]) + 1
    bounds = np.concatenate([[0], cut, [d.size]])
    uniq, counts = d[bounds[:-1]], np.diff(bounds)
    return {to_date(u): int(c) for u, c in zip(uniq, counts)}


def _keep_days(stream, keep, tz):
    if len(stream) == 0:
        return stream
    d, _ = local_dates(stream.timestamps, tz)
    keep_arr = np.array(sorted(keep), dtype="datetime64[D]")
    mask = np.isin(d, keep_arr)
    return replace(stream, timestamps=stream.timestamps[mask], values=stream.values[mask])


def hr_compliance_filter(dataset, min_readings=MIN_HR_READINGS):
    """Drop every subject-day with fewer than ``min_readings`` heart-rate samples.

    The day is removed from all wearable streams, daily scalars and sleep
    events of that subject.  EMA responses and box scores are not wearable
    data and are kept.  Subjects left without any sensor day remain in the
    dataset only if they still carry EMA or box-score records.

    Returns
    -------
    (SubjectDataset, ExclusionReport)
    """
    tz = dataset.timezone
    report = ExclusionReport()
    subjects = {}
    for sid, subj in dataset.subjects.items():
        days = sensor_days(subj, tz)
        counts = hr_reading_counts(subj, tz)
        keep = {d for d in days if counts.get(d, 0) >= min_readings}
        report.excluded[sid] = sorted(days - keep)
        report.retained[sid] = sorted(keep)
        new = SubjectData(
            sid,
            streams={m: _keep_days(s, keep, tz) for m, s in subj.streams.items()},
            daily={k: v for k, v in subj.daily.items() if k[0] in keep},
            sleep=[e for e in subj.sleep if sleep_date(e, tz) in keep],
            ema=list(subj.ema),
            boxscores=list(subj.boxscores),
        )
        if keep or new.ema or new.boxscores:
            subjects[sid] = new
    return SubjectDataset(subjects, list(dataset.diagnostics), tz), report


# ---------------------------------------------------------------- EMA / resampling


def daily_ema_average(responses, subject, day, tz="UTC"):
    """Mean score per EMA item over one subject's responses on one local day."""
    day = to_date(day)
    picked = [r for r in responses if r.subject_id == subject]
    if not picked:
        return {}
    days, _ = local_dates([r.timestamp for r in picked], tz)
    sums = defaultdict(float)
    counts = defaultdict(int)
    for r, d in zip(picked, days):
        if to_date(d) == day:
            sums[r.item] += r.score
            counts[r.item] += 1
    return {item: sums[item] / counts[item] for item in EMA_ITEMS if counts[item]}


def ema_daily_table(dataset):
    """Daily per-item EMA means for every subject as a long-to-wide frame.

    Columns: ``subject``, ``date`` and one column per EMA item (NaN where
    the item was not answered that day).
    """
    records = []
    for subj in dataset:
        if not subj.ema:
            continue
        days, _ = local_dates([r.timestamp for r in subj.ema], dataset.timezone)
        for r, d in zip(subj.ema, days):
            records.append((subj.subject_id, to_date(d), r.item, float(r.score)))
    if not records:
        return pd.DataFrame(columns=["subject", "date", *EMA_ITEMS])
    frame = pd.DataFrame(records, columns=["subject", "date", "item", "score"])
    wide = frame.pivot_table(index=["subject", "date"], columns="item", values="score", aggfunc="mean")
    wide = wide.reindex(columns=list(EMA_ITEMS)).reset_index()
    wide.columns.name = None
    return wide.sort_values(["subject", "date"]).reset_index(drop=True)


def resample_minutes(grid_start, n_minutes=1440, *, samples=None, segments=None, codes=STAGE_CODES):
    """Put samples or stage segments on a one-minute grid.

    Parameters
    ----------
    grid_start : float
        UTC seconds of the first grid minute.
    n_minutes : int
        Grid length (1440 for a calendar day).
    samples : (timestamps, values), optional
        Each minute holds the mean of the samples falling inside it.
    segments : sequence of (stage, start, end), optional
        Each minute holds the numeric code of the segment covering its
        midpoint.
    codes : dict
        Stage name to numeric code.

    Returns
    -------
    MinuteSeries
        Minutes without data are flagged missing.
    """
    values = np.full(n_minutes, np.nan)
    if samples is not None:
        ts, vals = (np.asarray(a, dtype=float) for a in samples)
        idx = np.floor((ts - grid_start) / 60.0).astype(np.int64)
        inside = (idx >= 0) & (idx < n_minutes)
        idx, vals = idx[inside], vals[inside]
        sums = np.bincount(idx, weights=vals, minlength=n_minutes)
        counts = np.bincount(idx, minlength=n_minutes)
        has = counts > 0
        values[has] = sums[has] / counts[has]
    elif segments is not None:
        mids = grid_start + 60.0 * np.arange(n_minutes) + 30.0
        for stage, s, e in segments:
            values[(mids >= s) & (mids < e)] = codes[stage]
    return MinuteSeries(values)
