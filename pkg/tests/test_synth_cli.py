import csv
import hashlib
import json

import numpy as np
import pytest

from vbperf import cli, ingest
from vbperf.synth import TABLE_V_DAILY, CohortSpec, generate_cohort


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_cohort_round_trip_without_diagnostics(small_cohort, small_dataset):
    root, truth = small_cohort
    assert small_dataset.diagnostics == []
    assert small_dataset.subject_ids() == sorted(truth["subjects"])
    assert truth["class_counts"] == {"good": 3, "poor": 2}
    _, report = ingest.hr_compliance_filter(small_dataset)
    assert all(kept == 5 for _, kept in report.counts().values())
    # the only excluded days are evenings before a block's first night (sleep onset, no heart rate)
    for sid, days in report.excluded.items():
        counts = ingest.hr_reading_counts(small_dataset.subjects[sid])
        assert all(counts.get(d, 0) == 0 for d in days)
    pc = ingest.load_phase_config(root / "phases.toml")
    assert pc.phases == ingest.TABLE_I_PHASES


def test_same_seed_same_bytes(tmp_path):
    spec = dict(n_subjects=2, class_proportions=(0.5, 0.5), days_per_phase={2: 1}, matches_per_subject=3, seed=4)
    generate_cohort(CohortSpec(**spec), tmp_path / "a")
    generate_cohort(CohortSpec(**spec), tmp_path / "b")
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")
    generate_cohort(CohortSpec(**{**spec, "seed": 5}), tmp_path / "c")
    assert _tree_digest(tmp_path / "a") != _tree_digest(tmp_path / "c")


def test_daily_class_means_follow_parameters(small_dataset, small_cohort):
    _, truth = small_cohort
    # pool all subject-days; with 25 rows the standard error is sd / 5
    for kind in ("hrv_rmssd_ms", "breathing_rate_rpm"):
        for cls in (0, 1):
            vals = [v for s in small_dataset for (d, k), v in s.daily.items()
                    if k == kind and truth["subjects"][s.subject_id]["class"] == cls]
            mean, sd = TABLE_V_DAILY[kind][2 * cls: 2 * cls + 2]
            assert abs(np.mean(vals) - mean) < 4 * sd / np.sqrt(len(vals))


def test_spec_validation():
    with pytest.raises(ValueError):
        CohortSpec(days_per_phase={3: 11})
    with pytest.raises(ValueError):
        CohortSpec(class_proportions=(0.5, 0.6))
    with pytest.raises(ValueError):
        CohortSpec(hr_phi=(0.7, 1.0))
    null = CohortSpec.null()
    assert null.daily["hrv_rmssd_ms"][:2] == null.daily["hrv_rmssd_ms"][2:]
    assert null.hr_phi[0] == null.hr_phi[1]


def test_noncompliant_days_are_dropped(tmp_path):
    spec = CohortSpec(n_subjects=2, class_proportions=(0.5, 0.5), days_per_phase={2: 6}, matches_per_subject=3,
                      noncompliant_rate=0.5, seed=2)
    generate_cohort(spec, tmp_path)
    _, report = ingest.hr_compliance_filter(ingest.load_dataset(tmp_path))
    dropped = sum(ex for ex, _ in report.counts().values())
    assert dropped > 0


# ---------------------------------------------------------------- CLI


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _outputs(out, stem):
    return sorted(out.glob(f"{stem}_*"))


def test_cli_label_counts_match_truth(small_cohort, tmp_path, capsys):
    root, truth = small_cohort
    assert _run("label", "--data", root, "--out", tmp_path) == 0
    (path,) = _outputs(tmp_path, "labels")
    rows = list(csv.DictReader(path.open()))
    assert {r["subject"]: int(r["class"]) for r in rows} == {s: v["class"] for s, v in truth["subjects"].items()}
    assert "good: 3  poor: 2" in capsys.readouterr().out
    manifest = json.loads(next(tmp_path.glob("manifest_label_*.json")).read_text())
    assert manifest["outputs"] == [path.name] and not (tmp_path / ".vbperf.lock").exists()


def test_cli_ingest_featurize_select(small_cohort, tmp_path):
    root, _ = small_cohort
    assert _run("ingest", "--data", root, "--out", tmp_path) == 0
    days = list(csv.DictReader(_outputs(tmp_path, "ingest_days")[0].open()))
    assert sum(d["status"] == "retained" for d in days) == 25
    assert _run("featurize", "--data", root, "--out", tmp_path, "--phases", "2,3") == 0
    header = _outputs(tmp_path, "features")[0].read_text().splitlines()[0].split(",")
    assert len(header) == 3 + 66
    assert _run("select", "--data", root, "--out", tmp_path, "--phases", "2") == 0
    assert _outputs(tmp_path, "selection_p2")


def test_cli_evaluate_is_byte_stable(small_cohort, tmp_path):
    root, _ = small_cohort
    args = ["evaluate", "--data", root, "--model", "gnb", "--iterations", "2", "--seed", "3"]
    assert _run(*args, "--out", tmp_path / "a") == 0
    assert _run(*args, "--out", tmp_path / "b") == 0
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").glob("*.csv")}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").glob("*.csv")}
    assert a == b and any(n.startswith("evaluate_summary_") for n in a)
    assert any("_predictions_1_" in n for n in a)


def test_cli_stats_and_report(small_cohort, tmp_path):
    root, _ = small_cohort
    assert _run("stats", "--data", root, "--out", tmp_path) == 0
    for stem in ("stats_ema_vs_season", "stats_perceived_vs_box", "stats_hits_vs_ema", "stats_trend"):
        assert _outputs(tmp_path, stem), stem
    assert _run("report", "--data", root, "--out", tmp_path, "--model", "gnb", "--iterations", "1") == 0
    assert _outputs(tmp_path, "report_hit_trend")


@pytest.mark.parametrize("argv", [
    ["evaluate", "--phases", "5"],
    ["evaluate", "--phases", ""],
    ["evaluate", "--phases", "2,2"],
    ["evaluate", "--model", "knn"],
    ["evaluate", "--no-smote", "--smote-k", "3"],
    ["evaluate", "--smote", "--no-smote"],
    ["evaluate", "--alpha", "1.5"],
    ["bogus"],
    ["synth", "--days", "2:x"],
])
def test_cli_usage_errors(argv, tmp_path, small_cohort):
    root, _ = small_cohort
    extra = ["--out", tmp_path / "o"] if argv[0] != "bogus" else []
    if argv[0] == "evaluate":
        extra += ["--data", root]
    assert _run(*argv, *extra) == cli.EXIT_USAGE


def test_cli_data_errors(tmp_path):
    assert _run("label", "--data", tmp_path / "missing", "--out", tmp_path / "o") == cli.EXIT_DATA
    (tmp_path / "empty").mkdir()
    assert _run("label", "--data", tmp_path / "empty", "--out", tmp_path / "o") == cli.EXIT_DATA


def test_cli_lock_blocks_concurrent_runs(small_cohort, tmp_path):
    root, _ = small_cohort
    tmp_path.joinpath(".vbperf.lock").write_text("1")
    assert _run("label", "--data", root, "--out", tmp_path) == cli.EXIT_USAGE


def test_cli_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('phases = "all"\nmodel = ["rf", "gnb"]\nalpha = 0.01\n')
    args = cli.build_parser().parse_args(["evaluate", "--config", str(cfg), "--alpha", "0.1"])
    rc = cli.resolve_config(args)
    assert rc.phases == list(cli.ALL_COMBINATIONS) and len(rc.phases) == 7
    assert rc.model == ["rf", "gnb"] and rc.alpha == 0.1
    cfg.write_text("colour = 1\n")
    with pytest.raises(cli.UsageError):
        cli.resolve_config(cli.build_parser().parse_args(["evaluate", "--config", str(cfg)]))


def test_cli_synth(tmp_path):
    out = tmp_path / "c"
    assert _run("synth", "--out", out, "--subjects", "2", "--poor-fraction", "0.5", "--days", "2:1",
                "--matches", "2", "--null") == 0
    truth = json.loads((out / "truth.json").read_text())
    assert truth["class_counts"] == {"good": 1, "poor": 1}
    assert _run("synth", "--out", out) == cli.EXIT_USAGE
