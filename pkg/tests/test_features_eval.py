import math
from datetime import date

import numpy as np
import pytest

from vbperf import features as F
from vbperf import ingest
from vbperf.evaluation import (
    PipelineConfig, bootstrap_loso, fold_seeds, loso_splits, run_fold, run_loso, write_iterations_csv,
)
from vbperf.features import FeatureMatrix, LabeledMatrix
from vbperf.models import ModelSpec
from vbperf.timeseries import MinuteSeries


def test_movement_bouts_and_breaks():
    steps = np.array([0] * 30 + [80] + [0] * 30 + [40], dtype=float)
    m = F.movement_features(steps)
    assert m["sedentary_bout_count"] == 2
    assert m["sedentary_bout_mean"] == 30
    assert m["sedentary_break_total"] == 2
    assert m["sedentary_break_mean"] == 1.5
    assert m["total_sedentary_time"] == 60 and m["active_minutes"] == 1 and m["light_activity_minutes"] == 1


def test_movement_short_runs_and_missing():
    m = F.movement_features(np.array([0] * 29 + [10], dtype=float))
    assert m["sedentary_bout_count"] == 0 and math.isnan(m["sedentary_bout_mean"])
    gap = np.array([0] * 20 + [np.nan] + [0] * 20 + [70], dtype=float)
    assert F.movement_features(gap)["sedentary_bout_count"] == 0
    assert all(math.isnan(v) for v in F.movement_features(np.full(5, np.nan)).values())


def test_activity_level_edges():
    assert F.activity_levels(np.array([0, 33, 34, 67, 68])).tolist() == [0, 0, 1, 1, 2]


def _event(stages):
    start, segs = 0.0, []
    for stage, minutes in stages:
        segs.append((stage, start, start + 60 * minutes))
        start += 60 * minutes
    return ingest.SleepEvent("S", 0.0, start, tuple(segs))


def test_sleep_efficiency_and_durations():
    s = F.sleep_features(_event([("light", 200), ("deep", 100), ("rem", 100), ("wake", 80)]))
    assert s["sleep_efficiency"] == pytest.approx(400 / 480 * 100)
    assert s["time_in_bed"] == 480 and s["sleep_wake_minutes"] == 80 and s["total_sleep_time"] == 400


def test_single_stage_night_has_missing_dfa():
    s = F.sleep_features(_event([("light", 480)]))
    assert s["sleep_efficiency"] == 100.0
    assert all(math.isnan(s[f"dfa_sleep_{n}"]) for n in F.DFA_WINDOWS) and math.isnan(s["sleep_hurst"])
    assert all(math.isnan(v) for v in F.sleep_features(None).values())


def test_constant_spo2_has_missing_dfa():
    r = F.respiratory_features(MinuteSeries(np.full(400, 96.0)), 14.0, 48.0)
    assert r["spo2_mean"] == 96.0 and math.isnan(r["spo2_hurst"]) and math.isnan(r["spo2_dfa_10"])
    assert r["breathing_rate"] == 14.0


def test_cardio_change_needs_previous_day():
    c = F.cardio_features(np.array([60.0, 62.0, 64.0]), None, hrv=50.0, hrv_prev=None, rhr=55.0, rhr_prev=57.0)
    assert math.isnan(c["hrv_change"]) and c["rhr_change"] == -2.0 and c["hr_mean"] == 62.0


def test_dfa_feature_is_log_fluctuation():
    x = np.random.default_rng(0).standard_normal(1440)
    from vbperf.timeseries import dfa_fluctuation

    c = F.cardio_features(x + 60, MinuteSeries(x))
    assert c["hr_dfa_30"] == pytest.approx(math.log(dfa_fluctuation(x, 30)))


def test_schema_and_display_names():
    assert len(F.FEATURES) == len(set(F.FEATURES)) == 66
    assert F.display_name("hr_kurtosis") == "HR Kurtosis"
    assert F.display_name("hrv") == "HRV" and F.display_name("spo2_dfa_10") == "SpO2-DFA-10"


def test_matrix_from_cohort(small_cohort, small_labeled):
    _, truth = small_cohort
    labeled, labs = small_labeled
    assert labeled.X.shape == (5 * 5, 66)
    assert set(labeled.phases.tolist()) == {2, 3}
    for s, lab in labs.items():
        assert lab.label == truth["subjects"][s]["class"]
        assert lab.season_hit_avg == pytest.approx(truth["subjects"][s]["season_hit_avg"])
    assert np.isfinite(labeled.column("hrv")).all()


def test_matrix_csv_round_trip(tmp_path, small_labeled):
    labeled, _ = small_labeled
    path = tmp_path / "m.csv"
    F.write_matrix_csv(labeled, path)
    back = F.read_matrix_csv(path)
    assert back.feature_names == labeled.feature_names
    assert np.array_equal(np.isnan(back.X), np.isnan(labeled.X))
    assert np.array_equal(np.nan_to_num(back.X), np.nan_to_num(labeled.X))


def test_empty_phase_selection_gives_empty_matrix(small_dataset):
    assert len(F.build_matrix(small_dataset, ())) == 0


# ---------------------------------------------------------------- evaluation


def _toy_matrix(n_subjects=6, days=12, seed=0, effect=2.0):
    rng = np.random.default_rng(seed)
    subjects = np.repeat([f"P{i:02d}" for i in range(n_subjects)], days)
    y = np.repeat(np.arange(n_subjects) % 2, days)
    X = rng.normal(size=(subjects.size, 4))
    X[:, 0] += effect * y
    X[rng.random(X.shape) < 0.05] = np.nan
    dates = np.tile(np.arange(days), n_subjects).astype("datetime64[D]")
    return LabeledMatrix(subjects, dates, np.full(subjects.size, 2), X, ("a", "b", "c", "d"), y)


def test_loso_splits_one_fold_per_subject():
    m = _toy_matrix(n_subjects=14, days=2)
    splits = loso_splits(m)
    assert len(splits) == 14
    for s, tr, te in splits:
        assert set(m.subjects[te]) == {s} and s not in set(m.subjects[tr])
    with pytest.raises(ValueError):
        loso_splits(m.take(np.flatnonzero(m.subjects == "P00")))


def test_fold_seeds_are_distinct_and_stable():
    assert fold_seeds(0, 1) == fold_seeds(0, 1)
    assert len({fold_seeds(s, f) for s in range(3) for f in range(14)}) == 42


def test_run_loso_pools_every_row():
    m = _toy_matrix()
    res = run_loso(m, ModelSpec.from_profile("gnb"))
    assert res.scores.size == len(m) and not res.skipped
    assert np.array_equal(res.truths, m.y)


def test_fold_with_single_training_class_is_skipped():
    m = _toy_matrix(n_subjects=3)
    res = run_loso(m, ModelSpec.from_profile("gnb"))
    assert res.skipped == ["P01"] and len(res.scores) == 2 * 12


def test_selection_fallback_uses_top_feature():
    m = _toy_matrix(effect=0.0, seed=3)
    fold = run_fold(m, loso_splits(m)[0], ModelSpec.from_profile("gnb"), PipelineConfig(alpha=1e-12))
    assert fold.selected == [fold.selection.f_results[0].feature]


def test_bootstrap_summary_and_determinism(tmp_path):
    m = _toy_matrix()
    spec = ModelSpec.from_profile("xgb", n_rounds=20)
    r1 = bootstrap_loso(m, spec, seed=5, iterations=3)
    r2 = bootstrap_loso(m, spec, seed=5, iterations=3)
    write_iterations_csv(r1, tmp_path / "a.csv")
    write_iterations_csv(r2, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    s = r1.summary()["f1"]
    assert len(s.split(" (")[0].split(".")[1]) == 4 and s.endswith(")")
    assert r1.std["f1"] == pytest.approx(np.std([m_["f1"] for m_ in r1.per_iteration]))
    with pytest.raises(ValueError):
        bootstrap_loso(m, spec, iterations=0)


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(alpha=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(collinearity_cutoff=1.5)
    with pytest.raises(ValueError):
        PipelineConfig(smote_k=0)
