"""Synthetic cohorts with planted class effects, written in the ingest file layout.

Daily scalars are class-conditional Gaussians, minute series are AR(1)
processes and box scores are integer counts whose season averages respect
each subject's class.  Everything is drawn from per-subject streams derived
from one seed, so the same spec always yields the same bytes.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import ingest
from .labels import BOX_METRICS, GOOD, HIT_THRESHOLD, POOR

log = logging.getLogger(__name__)

DAY_SECONDS = 86400

# (good mean, good sd, poor mean, poor sd)
TABLE_V_DAILY = {
    "hrv_rmssd_ms": (49.326, 19.131, 87.000, 29.455),
    "breathing_rate_rpm": (13.985, 1.365, 16.717, 2.102),
    "vo2max": (48.182, 2.056, 48.878, 0.693),
    "rhr_bpm": (55.0, 4.0, 55.0, 4.0),
}
TABLE_V_SEDENTARY = (2033.110, 407.725, 2351.821, 395.723)
TABLE_V_SLEEP_EFFICIENCY = (82.624, 20.682, 92.471, 4.509)

_FLOORS = {"hrv_rmssd_ms": 5.0, "breathing_rate_rpm": 6.0, "vo2max": 20.0, "rhr_bpm": 30.0}


@dataclass
class CohortSpec:
    """Parameters of a synthetic cohort.

    Class-conditional parameters are ``(good mean, good sd, poor mean,
    poor sd)``; pairs are ``(good, poor)``.  Sedentary minutes are drawn
    from ``sedentary`` multiplied by ``sedentary_scale`` so that a day
    never exceeds 1440 minutes.
    """

    n_subjects: int = 14
    class_proportions: tuple = (11 / 14, 3 / 14)
    days_per_phase: dict = field(default_factory=lambda: {2: 46, 3: 10})
    phases: tuple = ingest.TABLE_I_PHASES
    daily: dict = field(default_factory=lambda: dict(TABLE_V_DAILY))
    sedentary: tuple = TABLE_V_SEDENTARY
    sedentary_scale: float = 0.5
    sleep_efficiency: tuple = TABLE_V_SLEEP_EFFICIENCY
    hr_phi: tuple = (0.7, 0.9)  # not in Table V; planted so minute-level HR separates the classes
    hr_sd: float = 6.0
    spo2_phi: tuple = (0.9, 0.9)
    spo2_sd: float = 0.8
    # couplings
    stress_class: float = 0.0
    spo2_hits: float = 0.0
    performance_hits: float = 0.0
    # box scores
    hit_means: tuple = (0.28, 0.12)
    hit_spread: float = 0.04
    hit_sd: float = 0.08
    position_slopes: dict = field(default_factory=lambda: {"middle": 0.004})
    positions: tuple = ("outside", "middle", "setter")
    matches_per_subject: int = 25
    noncompliant_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValueError("a cohort needs at least one subject")
        p = np.asarray(self.class_proportions, dtype=float)
        if p.shape != (2,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("class proportions must be two non-negative numbers summing to 1")
        spans = {pid: (a, b) for pid, a, b in self.phases}
        for pid, n in self.days_per_phase.items():
            if pid not in spans:
                raise ValueError(f"phase {pid} not configured")
            a, b = spans[pid]
            if not 0 <= n <= (b - a).days + 1:
                raise ValueError(f"phase {pid} holds {(b - a).days + 1} days, {n} requested")
        sds = [v[1] for v in self.daily.values()] + [v[3] for v in self.daily.values()]
        sds += [self.sedentary[1], self.sedentary[3], self.sleep_efficiency[1], self.sleep_efficiency[3],
                self.hr_sd, self.spo2_sd, self.hit_sd, self.hit_spread]
        if min(sds) < 0:
            raise ValueError("standard deviations must be non-negative")
        if not all(-1 < phi < 1 for phi in (*self.hr_phi, *self.spo2_phi)):
            raise ValueError("AR(1) coefficients must lie in (-1, 1)")
        if self.matches_per_subject < 1:
            raise ValueError("each subject needs at least one match")
        if not set(self.positions) <= {"outside", "middle", "setter", "libero", "other"}:
            raise ValueError("unknown position")

    def class_counts(self):
        n_poor = int(round(self.n_subjects * self.class_proportions[1]))
        return self.n_subjects - n_poor, n_poor

    def phase_config(self):
        return ingest.PhaseConfig(tuple(self.phases))

    @classmethod
    def null(cls, **kw):
        """No planted effect: poor subjects share the good-class parameters."""
        spec = cls(**kw)
        spec.daily = {k: (g, s, g, s) for k, (g, s, _, _) in spec.daily.items()}
        g, s = spec.sedentary[:2]
        spec.sedentary = (g, s, g, s)
        g, s = spec.sleep_efficiency[:2]
        spec.sleep_efficiency = (g, s, g, s)
        spec.hr_phi = (spec.hr_phi[0],) * 2
        spec.spo2_phi = (spec.spo2_phi[0],) * 2
        spec.stress_class = spec.spo2_hits = spec.performance_hits = 0.0
        return spec

    def to_dict(self):
        d = asdict(self)
        d["phases"] = [[pid, str(a), str(b)] for pid, a, b in self.phases]
        d["days_per_phase"] = {str(k): v for k, v in self.days_per_phase.items()}
        return d


def _class_draw(rng, params, cls, size=None):
    mean, sd = (params[0], params[1]) if cls == GOOD else (params[2], params[3])
    return rng.normal(mean, sd, size)


def _ar1(rng, phi, n, m=1):
    """``m`` unit-variance AR(1) paths of length ``n`` (shape (m, n))."""
    eps = rng.standard_normal((m, n))
    out = np.empty((m, n))
    out[:, 0] = eps[:, 0]
    c = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        out[:, t] = phi * out[:, t - 1] + c * eps[:, t]
    return out


def _partition(rng, total, k):
    """Split ``total`` into ``k`` positive integer parts."""
    if k <= 1:
        return np.array([total])
    cuts = np.sort(rng.choice(np.arange(1, total), size=k - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [total]]))


def _steps_day(rng, sedentary):
    """Per-minute step counts with exactly ``sedentary`` zero minutes."""
    sedentary = int(min(max(sedentary, 1), 1439))
    active = 1440 - sedentary
    k = int(max(1, min(round(sedentary / 80), active, sedentary)))
    sed = _partition(rng, sedentary, k)
    act = _partition(rng, active, k)
    steps = np.zeros(1440, dtype=np.int64)
    pos = 0
    for s, a in zip(sed, act):
        pos += s
        brisk = rng.random() < 0.35
        lo, hi = (68, 130) if brisk else (1, 33)
        steps[pos:pos + a] = rng.integers(lo, hi + 1, size=a)
        pos += a
    return steps


def _sleep_segments(rng, start, n_minutes, efficiency):
    """Contiguous stage segments (minute aligned) with the requested efficiency."""
    wake = int(round(n_minutes * (1 - efficiency / 100.0)))
    wake = min(max(wake, 0), n_minutes - 1)
    asleep = n_minutes - wake
    cycle = ("light", "deep", "light", "rem")
    n_blocks = max(1, asleep // 30)
    blocks = [(cycle[i % 4], int(m)) for i, m in enumerate(_partition(rng, asleep, n_blocks))]
    if wake:
        n_wake = int(min(max(1, wake // 15), len(blocks) + 1, wake))
        slots = np.sort(rng.choice(len(blocks) + 1, size=n_wake, replace=False))
        parts = _partition(rng, wake, n_wake)
        for slot, m in sorted(zip(slots, parts), reverse=True):
            blocks.insert(int(slot), ("wake", int(m)))
    segments, t = [], start
    for stage, m in blocks:
        segments.append((stage, t, t + 60 * m))
        t += 60 * m
    return segments


@dataclass
class _Subject:
    sid: str
    cls: int
    position: str
    days: list
    matches: dict  # date -> box-score row dict
    rng: np.random.Generator


def _phase_days(spec):
    days = []
    for pid, a, _ in spec.phases:
        for i in range(spec.days_per_phase.get(pid, 0)):
            days.append(a + timedelta(days=i))
    return days


def _match_rows(rng, cls, position, dates, spec, season_start, season_len):
    """Box-score rows whose realised season average sits on the class side of the threshold."""
    slope = spec.position_slopes.get(position, 0.0)
    center = (season_len - 1) / 2.0
    for _ in range(1000):
        mu = rng.normal(spec.hit_means[cls], spec.hit_spread)
        rows, hits = {}, []
        for d in dates:
            t = (d - season_start).days
            h = float(np.clip(rng.normal(mu + slope * (t - center), spec.hit_sd), -1.0, 1.0))
            attempts = int(rng.integers(5, 31))
            net = int(np.clip(round(h * attempts), -attempts, attempts))
            lo, hi = max(0, -net), (attempts - net) // 2
            errors = lo + int(rng.binomial(hi - lo, 0.3)) if hi > lo else lo
            kills = errors + net
            aces = int(rng.poisson(0.8))
            solos = int(rng.poisson(1.0 if position == "middle" else 0.3))
            row = {
                "kills": kills, "errors": errors, "attempts": attempts,
                "points": kills + aces + solos, "digs": int(rng.poisson(4.0)),
                "assists": int(rng.poisson(25.0 if position == "setter" else 1.0)),
                "service_aces": aces, "service_errors": int(rng.poisson(1.5)),
                "reception_errors": int(rng.poisson(0.6)), "block_solos": solos,
                "block_errors": int(rng.poisson(0.4)), "ball_handling_errors": int(rng.poisson(0.2)),
                "total_attempts": attempts,
            }
            rows[d] = row
            hits.append(net / attempts)
        avg = float(np.mean(hits))
        if (avg > HIT_THRESHOLD) == (cls == GOOD):
            return rows
    raise ValueError("could not draw box scores matching the class; widen hit_means")


def _hit_z(spec, subj, d):
    row = subj.matches.get(d)
    if row is None:
        return 0.0
    return ((row["kills"] - row["errors"]) / row["attempts"] - spec.hit_means[subj.cls]) / max(spec.hit_sd, 1e-9)


def _fmt_times(seconds):
    return np.datetime_as_string(np.asarray(seconds, dtype=np.int64).astype("datetime64[s]"), unit="s")


def _write_stream(path, seconds, values):
    stamps = _fmt_times(seconds)
    with open(path, "w", newline="") as fh:
        fh.write("timestamp,value\n")
        fh.write("".join(stamps.astype(object) + "Z," + np.asarray(values).astype(object) + "\n"))


def _iso(seconds):
    return ingest.format_timestamp(int(seconds))


def _generate_subject(spec, subj, out):
    rng = subj.rng
    cls = subj.cls
    sid = subj.sid
    n = len(subj.days)
    starts = np.array([ingest.day_start(d) for d in subj.days], dtype=np.int64)
    hr_paths = _ar1(rng, spec.hr_phi[cls], 1440, n)
    streams = {m: ([], []) for m in ingest.METRICS}
    daily_lines, sleep_lines = [], []
    for i, (d, t0) in enumerate(zip(subj.days, starts)):
        # movement
        sed = _class_draw(rng, spec.sedentary, cls) * spec.sedentary_scale
        steps = _steps_day(rng, round(sed))
        minutes = t0 + 60 * np.arange(1440)
        streams["steps"][0].append(minutes)
        streams["steps"][1].append(steps.astype(str))
        streams["distance"][0].append(minutes)
        streams["distance"][1].append(np.char.mod("%.4f", steps * 0.0008))
        streams["calories"][0].append(minutes)
        streams["calories"][1].append(np.char.mod("%.2f", 1.2 + 0.05 * steps))

        # sleep ending this morning
        bed = int(t0 - 3600 + 60 * int(rng.integers(-45, 46)))
        tib = int(np.clip(round(rng.normal(470, 40)), 240, 660))
        eff = float(np.clip(_class_draw(rng, spec.sleep_efficiency, cls), 30.0, 100.0))
        segs = _sleep_segments(rng, bed, tib, eff)
        wake = bed + 60 * tib
        sleep_lines.append(json.dumps({
            "start": _iso(bed), "end": _iso(wake),
            "segments": [{"stage": s, "start": _iso(a), "end": _iso(b)} for s, a, b in segs],
        }, separators=(",", ":")))

        # heart rate, ~8.6 readings per minute
        asleep_min = max(0, (wake - int(t0)) // 60)
        base = 62.0 + spec.hr_sd * hr_paths[i]
        base[:asleep_min] -= 8.0
        base[steps >= 68] += 35.0
        base[(steps > 0) & (steps < 68)] += 12.0
        gaps = rng.integers(5, 10, size=DAY_SECONDS // 5)
        offs = np.cumsum(gaps)
        offs = offs[offs < DAY_SECONDS]
        if rng.random() < spec.noncompliant_rate:
            offs = offs[offs < int(DAY_SECONDS * rng.uniform(0.3, 0.65))]
        hr = np.clip(np.rint(base[offs // 60] + rng.normal(0, 1.5, offs.size)), 30, 220).astype(np.int64)
        streams["heart_rate"][0].append(t0 + offs)
        streams["heart_rate"][1].append(hr.astype(str))

        # SpO2 once a minute while asleep
        z = _hit_z(spec, subj, d)
        scale = spec.spo2_sd * math.exp(-spec.spo2_hits * z)
        path = _ar1(rng, spec.spo2_phi[cls], tib)[0] * scale
        dips = (rng.random(tib) < 0.03) * rng.exponential(2.0 * scale, tib)
        spo2 = np.clip(96.0 + path - dips, 80.0, 100.0)
        streams["spo2"][0].append(bed + 60 * np.arange(tib) + 30)
        streams["spo2"][1].append(np.char.mod("%.1f", spo2))

        for kind in ingest.DAILY_KINDS:
            v = max(_class_draw(rng, spec.daily[kind], cls), _FLOORS[kind])
            daily_lines.append(f"{d.isoformat()},{kind},{v:.3f}")

    sdir = out / "streams" / sid
    sdir.mkdir(parents=True, exist_ok=True)
    for metric, (ts, vals) in streams.items():
        if ts:
            _write_stream(sdir / f"{metric}.csv", np.concatenate(ts), np.concatenate(vals))
    (out / "daily" / f"{sid}.csv").write_text("date,kind,value\n" + "".join(l + "\n" for l in daily_lines))
    (out / "sleep" / f"{sid}.jsonl").write_text("".join(l + "\n" for l in sleep_lines))

    # EMA twice a day on sensor days and match days
    ema = []
    stress_shift = spec.stress_class * (1.0 if cls == POOR else -1.0)
    for d in sorted(set(subj.days) | set(subj.matches)):
        z = _hit_z(spec, subj, d)
        t0 = int(ingest.day_start(d))
        for hour in (8, 21):
            if rng.random() < 0.1:
                continue
            for item in ingest.EMA_ITEMS:
                mean = 4.0
                if item == "stress":
                    mean += stress_shift
                elif item == "performance":
                    mean += spec.performance_hits * z
                score = int(np.clip(round(rng.normal(mean, 1.0)), 1, 7))
                ema.append(f"{_iso(t0 + 3600 * hour)},{item},{score}")
    (out / "ema" / f"{sid}.csv").write_text("timestamp,item,score\n" + "".join(l + "\n" for l in ema))

    box = [",".join(ingest.BOX_HEADER)]
    for d in sorted(subj.matches):
        row = subj.matches[d]
        box.append(",".join([d.isoformat(), *(str(row[k]) for k in BOX_METRICS), subj.position]))
    (out / "boxscores" / f"{sid}.csv").write_text("\n".join(box) + "\n")


def generate_cohort(spec, out_dir):
    """Write a cohort under ``out_dir`` in the ingest layout plus ``truth.json`` and ``phases.toml``.

    Returns
    -------
    dict
        The truth manifest (classes, season averages, positions, spec).
    """
    out = Path(out_dir)
    for sub in ("streams", "daily", "sleep", "ema", "boxscores"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    n_good, n_poor = spec.class_counts()
    classes = [GOOD] * n_good + [POOR] * n_poor
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_subjects + 1)
    order = np.random.default_rng(seeds[-1]).permutation(spec.n_subjects)
    days = _phase_days(spec)
    season = {pid: (a, b) for pid, a, b in spec.phases}[4]
    season_len = (season[1] - season[0]).days + 1
    season_days = [season[0] + timedelta(days=i) for i in range(season_len)]
    width = max(2, len(str(spec.n_subjects)))
    truth = {"subjects": {}, "spec": spec.to_dict()}
    for i in range(spec.n_subjects):
        rng = np.random.default_rng(seeds[i])
        sid = f"S{i + 1:0{width}d}"
        cls = classes[order[i]]
        position = spec.positions[i % len(spec.positions)]
        k = min(spec.matches_per_subject, season_len)
        picked = sorted(season_days[j] for j in rng.choice(season_len, size=k, replace=False))
        matches = _match_rows(rng, cls, position, picked, spec, season[0], season_len)
        subj = _Subject(sid, cls, position, days, matches, rng)
        _generate_subject(spec, subj, out)
        hits = [(r["kills"] - r["errors"]) / r["attempts"] for r in matches.values()]
        truth["subjects"][sid] = {"class": cls, "position": position, "season_hit_avg": float(np.mean(hits)),
                                  "n_matches": len(matches)}
        log.debug("generated %s (class %d, %s)", sid, cls, position)
    truth["class_counts"] = {"good": n_good, "poor": n_poor}
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    (out / "phases.toml").write_text(ingest.dump_phase_config(spec.phase_config()))
    return truth
