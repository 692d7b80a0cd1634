import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vbperf import ingest, labels
from vbperf.labels import BoxScore


def test_assign_phase_boundaries():
    assert ingest.assign_phase(date(2022, 10, 23)) == 1
    assert ingest.assign_phase(date(2022, 11, 17)) == 1
    assert ingest.assign_phase(date(2022, 11, 18)) == 2
    assert ingest.assign_phase(date(2023, 1, 2)) == 2
    assert ingest.assign_phase(date(2023, 1, 3)) == 3
    assert ingest.assign_phase(date(2023, 1, 13)) == 4
    assert ingest.assign_phase(date(2023, 4, 28)) == 4
    assert ingest.assign_phase(date(2023, 4, 29)) is None
    assert ingest.assign_phase(date(2022, 10, 22)) is None


def test_phase_config_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        ingest.PhaseConfig(((1, date(2023, 1, 5), date(2023, 1, 1)),))
    with pytest.raises(ValueError):
        ingest.PhaseConfig(((1, date(2023, 1, 1), date(2023, 1, 5)), (2, date(2023, 1, 5), date(2023, 1, 9))))
    cfg = ingest.PhaseConfig(timezone="America/Chicago")
    path = tmp_path / "p.toml"
    path.write_text(ingest.dump_phase_config(cfg))
    assert ingest.load_phase_config(path) == cfg


def test_parse_phase_selection():
    assert ingest.parse_phase_selection("3, 2") == (2, 3)
    for bad in ("", "5", "2,2", "x"):
        with pytest.raises(ValueError):
            ingest.parse_phase_selection(bad)


def test_parse_timestamps_fast_and_general_paths():
    fast = ingest.parse_timestamps(["2023-01-01T00:00:00Z", "2023-01-01T00:01:00Z"])
    assert fast.tolist() == [1672531200.0, 1672531260.0]
    mixed = ingest.parse_timestamps(["2023-01-01T01:00:00+01:00", "garbage"])
    assert mixed[0] == 1672531200.0 and math.isnan(mixed[1])


def test_local_dates_timezone():
    ts = ingest.parse_timestamps(["2023-01-02T03:00:00Z"])
    assert str(ingest.local_dates(ts, "UTC")[0][0]) == "2023-01-02"
    assert str(ingest.local_dates(ts, "America/Chicago")[0][0]) == "2023-01-01"


def _subject_with_hr(counts):
    ts, t0 = [], ingest.day_start(date(2023, 1, 3))
    for i, c in enumerate(counts):
        ts.append(t0 + i * 86400 + np.arange(c) * (86400 / max(c, 1)))
    ts = np.concatenate(ts)
    stream = ingest.SampleStream("S", "heart_rate", ts, np.full(ts.size, 60.0))
    return ingest.SubjectData("S", streams={"heart_rate": stream})


def test_compliance_threshold_boundary():
    ds = ingest.SubjectDataset({"S": _subject_with_hr([8767, 8768])})
    filtered, report = ingest.hr_compliance_filter(ds)
    assert report.excluded["S"] == [date(2023, 1, 3)]
    assert report.retained["S"] == [date(2023, 1, 4)]
    assert len(filtered.subjects["S"].streams["heart_rate"]) == 8768
    assert ingest.MIN_HR_READINGS == 8768


def test_loader_diagnostics(tmp_path):
    (tmp_path / "streams" / "S1").mkdir(parents=True)
    (tmp_path / "streams" / "S1" / "heart_rate.csv").write_text(
        "timestamp,value\n2023-01-01T00:00:00Z,60\n2023-01-01T00:00:00Z,61\nbad,62\n"
        "2023-01-01T00:00:10Z,999\n2023-01-01T00:00:20Z,x\n2023-01-01T00:00:30Z,70\n")
    (tmp_path / "daily").mkdir()
    (tmp_path / "daily" / "S1.csv").write_text("date,kind,value\n2023-01-01,hrv_rmssd_ms,50\n2023-01-01,hrv_rmssd_ms,51\n"
                                               "2023-01-01,nonsense,3\n")
    (tmp_path / "boxscores").mkdir()
    (tmp_path / "boxscores" / "S1.csv").write_text(",".join(ingest.BOX_HEADER) + "\n"
                                                   "2023-02-01," + ",".join(["1"] * 13) + ",Middle\n"
                                                   "2023-02-02," + ",".join(["5", "1", "2"] + ["0"] * 10) + ",middle\n")
    ds = ingest.load_dataset(tmp_path)
    s = ds.subjects["S1"]
    assert s.streams["heart_rate"].values.tolist() == [60.0, 70.0]
    assert len(ds.diagnostics) == 4 + 2 + 1
    assert s.daily == {(date(2023, 1, 1), "hrv_rmssd_ms"): 50.0}
    assert [b.position for b in s.boxscores] == ["middle"]
    with pytest.raises(FileNotFoundError):
        ingest.load_dataset(tmp_path / "missing")


def test_sleep_attributed_to_wake_date():
    start = ingest.day_start(date(2023, 1, 3)) - 3600
    ev = ingest.SleepEvent("S", start, start + 8 * 3600, (("light", start, start + 8 * 3600),))
    assert ingest.sleep_date(ev) == date(2023, 1, 3)
    with pytest.raises(ValueError):
        ingest.SleepEvent("S", 0.0, 100.0, (("light", 0.0, 50.0),))


def test_resample_minutes_means_and_stages():
    g = ingest.resample_minutes(0.0, 3, samples=([0, 30, 61, 500], [60, 62, 70, 99]))
    assert g.values[:2].tolist() == [61.0, 70.0] and g.missing.tolist() == [False, False, True]
    st_ = ingest.resample_minutes(0.0, 3, segments=[("deep", 0.0, 90.0), ("wake", 90.0, 180.0)])
    assert st_.values.tolist() == [3.0, 0.0, 0.0]


def test_ema_daily_average():
    t0 = ingest.day_start(date(2023, 1, 3))
    rs = [ingest.EmaResponse("S", t0 + 3600 * 8, "mood", 3), ingest.EmaResponse("S", t0 + 3600 * 21, "mood", 6)]
    assert ingest.daily_ema_average(rs, "S", date(2023, 1, 3)) == {"mood": 4.5}
    with pytest.raises(ValueError):
        ingest.EmaResponse("S", t0, "mood", 8)


# ---------------------------------------------------------------- labels


@given(st.integers(0, 60), st.integers(0, 60), st.integers(1, 60), st.integers(1, 5))
def test_hit_percentage_formula_bounds_and_scale(kills, errors, attempts, k):
    if kills > attempts or errors > attempts:
        return
    h = labels.hit_percentage(kills, errors, attempts)
    assert h == oracles.hit_pct(kills, errors, attempts)
    assert -1.0 <= h <= 1.0
    assert labels.hit_percentage(k * kills, k * errors, k * attempts) == pytest.approx(h, abs=1e-15)


def test_hit_percentage_no_attempts():
    assert math.isnan(labels.hit_percentage(0, 0, 0))


def test_binarize_boundary():
    assert labels.binarize(0.25) == labels.GOOD
    assert labels.binarize(0.15) == labels.POOR
    assert labels.binarize(0.2) == labels.POOR
    assert labels.binarize(0.2000001) == labels.GOOD
    with pytest.raises(ValueError):
        labels.binarize(float("nan"))


def test_season_average_weightings():
    b = [BoxScore("S", date(2023, 2, 1), 5, 1, 10), BoxScore("S", date(2023, 2, 2), 1, 0, 2),
         BoxScore("S", date(2023, 2, 3), 0, 0, 0)]
    assert labels.season_average(b) == pytest.approx((0.4 + 0.5) / 2)
    assert labels.season_average(b, "attempts") == pytest.approx(5 / 12)
    with pytest.raises(ValueError):
        labels.season_average(b, "minutes")


def test_season_labels_skip_subjects_without_attempts():
    out = labels.season_labels({"A": [BoxScore("A", date(2023, 2, 1), 0, 0, 0)],
                                "B": [BoxScore("B", date(2023, 2, 1), 3, 0, 10)]})
    assert list(out) == ["B"] and out["B"].label == labels.GOOD and out["B"].n_matches == 1


def test_boxscore_validation():
    with pytest.raises(ValueError):
        BoxScore("S", date(2023, 2, 1), 5, 0, 3)
    with pytest.raises(ValueError):
        BoxScore("S", date(2023, 2, 1), 1, 0, 3, position="goalie")
