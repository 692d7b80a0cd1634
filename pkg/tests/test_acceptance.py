"""Acceptance suite: one verdict line per criterion.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

import oracles
from vbperf import cli, ingest, labels
from vbperf.evaluation import PipelineConfig, bootstrap_loso, loso_splits, run_fold
from vbperf.features import LabeledMatrix, build_matrix
from vbperf.metrics import auroc, metrics
from vbperf.models import ModelSpec, dumps
from vbperf.preprocess import smote
from vbperf.selection import FTestResult, SelectionReport, f_test, format_selection_table
from vbperf.stats.correlation import spearman
from vbperf.stats.trend import ols_trend
from vbperf.synth import CohortSpec, generate_cohort
from vbperf.timeseries import approximate_entropy, cooccurrence_stats, hurst_from_dfa, sample_entropy

RESULTS = []


def verdict(number, title, ok, detail):
    line = f"AC-{number:<2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1 DFA


def test_ac01_dfa_exponent_recovery():
    rng = np.random.default_rng(2024)
    n = 20_000
    cases = (
        ("white noise", lambda: rng.standard_normal(n), 0.5, 0.05),
        ("random walk", lambda: np.cumsum(rng.standard_normal(n)), 1.5, 0.1),
        ("fGn H=0.7", lambda: oracles.fgn_davies_harte(n, 0.7, rng), 0.7, 0.1),
    )
    parts, ok = [], True
    for name, make, target, tol in cases:
        x = make()
        t0 = time.perf_counter()
        h = hurst_from_dfa(x)
        secs = time.perf_counter() - t0
        good = abs(h - target) <= tol and secs <= 5.0
        ok &= good
        parts.append(f"{name} {h:.3f} (target {target}±{tol}, {secs:.2f}s)")
    verdict(1, "DFA exponent recovery", ok, "; ".join(parts))


# ---------------------------------------------------------------- 2 entropy


def test_ac02_entropy_oracle_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(20, 501))
        x = np.round(rng.normal(size=n) + 0.3 * np.sin(np.arange(n) / 5), 2)
        s, so = sample_entropy(x), oracles.sampen_bruteforce(x)
        a, ao = approximate_entropy(x), oracles.apen_bruteforce(x)
        if math.isnan(s) != math.isnan(so):
            worst = math.inf
        elif not math.isnan(s):
            worst = max(worst, abs(s - so))
        worst = max(worst, abs(a - ao))
    verdict(2, "entropy vs brute-force templates", worst <= 1e-9,
            f"max |diff| {worst:.2e} over 50 series of length <= 500 (tol 1e-9)")


# ---------------------------------------------------------------- 3 co-occurrence


def test_ac03_cooccurrence_oracle_and_limits():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        x = rng.normal(size=int(rng.integers(2, 400))) * rng.uniform(0.1, 50)
        got, want = cooccurrence_stats(x), oracles.cooccurrence_direct(x)
        for k, v in want.items():
            if math.isnan(v) or math.isnan(got[k]):
                worst = worst if (math.isnan(v) and math.isnan(got[k])) else math.inf
            else:
                worst = max(worst, abs(got[k] - v))
    c = cooccurrence_stats(np.full(100, 42.0))
    limits = c["inertia"] == 0.0 and c["energy"] == 1.0 and c["local_homogeneity"] == 1.0
    verdict(3, "co-occurrence vs direct summation", worst <= 1e-12 and limits,
            f"max |diff| {worst:.2e} over 50 series (tol 1e-12); constant limits exact: {limits}")


# ---------------------------------------------------------------- 4 hit percentage


def test_ac04_hit_percentage_suite():
    rng = np.random.default_rng(4)
    ok_formula = ok_bounds = ok_scale = True
    for _ in range(1000):
        a = int(rng.integers(1, 60))
        k = int(rng.integers(0, a + 1))
        e = int(rng.integers(0, a - k + 1))
        h = labels.hit_percentage(k, e, a)
        ok_formula &= h == (k - e) / a
        ok_bounds &= -1.0 <= h <= 1.0
        ok_scale &= abs(labels.hit_percentage(3 * k, 3 * e, 3 * a) - h) < 1e-15
    ok_bounds &= labels.hit_percentage(0, 10, 10) == -1.0 and labels.hit_percentage(10, 0, 10) == 1.0
    b25, b15, b20 = labels.binarize(0.25), labels.binarize(0.15), labels.binarize(0.2)
    ok_bin = b25 == labels.GOOD and b15 == labels.POOR and b20 == labels.POOR
    ok = ok_formula and ok_bounds and ok_scale and ok_bin and math.isnan(labels.hit_percentage(0, 0, 0))
    verdict(4, "hit percentage", ok,
            f"formula {ok_formula}, bounds {ok_bounds}, scale-invariant {ok_scale}, "
            f"0.25->good {b25 == labels.GOOD}, 0.15->poor {b15 == labels.POOR}, 0.2->poor {b20 == labels.POOR}")


# ---------------------------------------------------------------- 5 leakage


def _leak_matrix(seed=0):
    rng = np.random.default_rng(seed)
    subjects = np.repeat([f"P{i}" for i in range(6)], 10)
    y = np.repeat([0, 1, 0, 1, 0, 0], 10)
    X = rng.normal(size=(60, 5))
    X[:, 0] += 1.5 * y
    X[:, 1] += 0.8 * y
    X[rng.random(X.shape) < 0.08] = np.nan
    dates = np.tile(np.arange(10), 6).astype("datetime64[D]")
    return LabeledMatrix(subjects, dates, np.full(60, 2), X, tuple("abcde"), y)


def _fold_fingerprint(fold):
    t = fold.transform
    return (t.means.tobytes(), t.mins.tobytes(), t.maxs.tobytes(), tuple(fold.selected),
            repr(sorted(fold.spec.hyperparameters.items())), dumps(fold.model))


def test_ac05_leakage_sentinels():
    m = _leak_matrix()
    runs = (("xgb", PipelineConfig()), ("rf", PipelineConfig()), ("gnb", PipelineConfig(tune_budget=3)))
    checked = changed = 0
    for profile, config in runs:
        spec = ModelSpec.from_profile(profile, n_rounds=15) if profile == "xgb" else ModelSpec.from_profile(profile)
        if profile == "rf":
            spec = ModelSpec.from_profile("rf", n_trees=15)
        for i, split in enumerate(loso_splits(m)):
            base = run_fold(m, split, spec, config, seed=1, fold=i)
            mutated = m.take(np.arange(len(m)))
            te = split[2]
            noise = np.random.default_rng(i).normal(1e3, 1e2, size=(te.size, m.X.shape[1]))
            noise[::3, 0] = np.nan
            mutated.X[te] = noise
            again = run_fold(mutated, split, spec, config, seed=1, fold=i)
            checked += 1
            changed += _fold_fingerprint(base) != _fold_fingerprint(again)
    verdict(5, "leakage sentinels", changed == 0,
            f"{checked} folds (gbt, rf, gnb with tuning); fitted state changed in {changed}")


# ---------------------------------------------------------------- 6 SMOTE


def test_ac06_smote_contract():
    equal = convex = determ = True
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n_min, n_maj = int(rng.integers(2, 15)), int(rng.integers(16, 60))
        X = rng.normal(size=(n_min + n_maj, 4))
        y = np.r_[np.ones(n_min, int), np.zeros(n_maj, int)]
        Xr, yr = smote(X, y, k=5, seed=seed)
        equal &= np.bincount(yr).tolist() == [n_maj, n_maj]
        pts = X[:n_min]
        for p in Xr[len(X):]:
            found = False
            for i in range(n_min):
                for j in range(n_min):
                    d = pts[j] - pts[i]
                    if i == j or not d.any():
                        continue
                    u = float((p - pts[i]) @ d / (d @ d))
                    if -1e-12 <= u <= 1 + 1e-12 and np.allclose(pts[i] + u * d, p, atol=1e-10):
                        found = True
            convex &= found
        X2, y2 = smote(X, y, k=5, seed=seed)
        determ &= np.array_equal(X2, Xr) and np.array_equal(y2, yr)
    verdict(6, "SMOTE contract", equal and convex and determ,
            f"counts equalized {equal}, synthetic rows on minority segments {convex}, seed-deterministic {determ}")


# ---------------------------------------------------------------- 7 F-test / Spearman


def test_ac07_ftest_spearman_oracles():
    from scipy import stats

    rng = np.random.default_rng(17)
    f_err = p_err = t2_err = r_err = rp_err = 0.0
    for _ in range(100):
        n0, n1 = rng.integers(3, 50, size=2)
        v = np.r_[rng.normal(0, 1, n0), rng.normal(rng.normal(), rng.uniform(0.3, 3), n1)]
        c = np.r_[np.zeros(n0, int), np.ones(n1, int)]
        F, p = f_test(v, c)
        want = oracles.anova_two_group(v, c)
        f_err = max(f_err, abs(F - want) / max(1.0, want))
        p_err = max(p_err, abs(p - 2 * stats.t.sf(abs(oracles.pooled_t(v, c)), v.size - 2)))
        t2_err = max(t2_err, abs(F - oracles.pooled_t(v, c) ** 2) / max(1.0, F))
        x = np.round(rng.normal(size=int(rng.integers(5, 80))), 1)
        yv = np.round(x * rng.uniform(-1, 1) + rng.normal(size=x.size), 1)
        rho, rp = spearman(x, yv)
        want_rho, want_p = oracles.spearman_textbook(x, yv)
        r_err = max(r_err, abs(rho - want_rho))
        rp_err = max(rp_err, abs(rp - want_p))
    rep = SelectionReport(f_results=[FTestResult("hrv", 25.481, 0.00002, 49.326, 19.131, 87.000, 29.455, 600, 160)])
    row = format_selection_table(rep).splitlines()[2]
    fmt_ok = all(s in row for s in ("HRV", "25.481", "<0.001", "49.326 (19.131)", "87.000 (29.455)"))
    ok = max(f_err, p_err, t2_err, r_err, rp_err) <= 1e-10 and fmt_ok
    verdict(7, "F-test and Spearman oracles", ok,
            f"F {f_err:.1e}, p {p_err:.1e}, F=t^2 {t2_err:.1e}, rho {r_err:.1e}, rho p {rp_err:.1e} "
            f"(tol 1e-10); table row format {fmt_ok}")


# ---------------------------------------------------------------- 8 AUROC


def test_ac08_auroc_oracle_and_limits():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(300):
        n = int(rng.integers(2, 201))
        t = rng.integers(0, 2, n)
        if t.min() == t.max():
            t[0] = 1 - t[0]
        s = np.round(rng.random(n), int(rng.integers(1, 4)))
        worst = max(worst, abs(auroc(t, s) - oracles.auroc_pairwise(t.tolist(), s.tolist())))
    t = np.array([1, 1, 0, 0, 1])
    perfect = metrics(np.array([0.9, 0.8, 0.1, 0.2, 0.7]), t)
    none = metrics(np.zeros(5), t)
    limits = perfect["auroc"] == 1.0 and perfect["f1"] == 1.0 and none["recall"] == 0.0 and none["f1"] == 0.0
    verdict(8, "AUROC pairwise oracle", worst <= 1e-12 and limits,
            f"max |diff| {worst:.1e} over 300 sets of <= 200 rows (tol 1e-12); perfect 1.0 / recall 0 exact: {limits}")


# ---------------------------------------------------------------- 9-10 synthetic cohort


def _cohort_pipeline(spec, root):
    t0 = time.perf_counter()
    generate_cohort(spec, root)
    ds, _ = ingest.hr_compliance_filter(ingest.load_dataset(root))
    labs = labels.season_labels({s.subject_id: s.boxscores for s in ds})
    lm, _ = labels.label_matrix(build_matrix(ds, (2, 3)), labs)
    report = bootstrap_loso(lm, ModelSpec.from_profile("gbt"), PipelineConfig(), seed=0, iterations=10)
    return ds, lm, report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    return _cohort_pipeline(CohortSpec(seed=1), tmp_path_factory.mktemp("planted"))


@pytest.mark.slow
def test_ac09_end_to_end_synthetic(planted, tmp_path_factory):
    _, lm, rep, t_planted = planted
    _, lm0, null, t_null = _cohort_pipeline(CohortSpec.null(seed=2), tmp_path_factory.mktemp("null"))
    f1, auc, auc0 = rep.mean["f1"], rep.mean["auroc"], null.mean["auroc"]
    total = t_planted + t_null
    ok = f1 >= 0.9 and auc >= 0.95 and abs(auc0 - 0.5) <= 0.1 and total <= 300
    verdict(9, "end-to-end synthetic cohort", ok,
            f"planted {len(lm)} days F1 {rep.summary()['f1']} AUROC {rep.summary()['auroc']} "
            f"(>= 0.9 / 0.95); null AUROC {auc0:.4f} (0.5±0.1); {total:.0f}s total (<= 300s)")


@pytest.mark.slow
def test_ac10_planted_slope_recovery(planted):
    ds = planted[0]
    pc = ingest.PhaseConfig()
    season = next(a for pid, a, _ in pc.phases if pid == 4)
    rows = [(b.hit_percentage, (b.date - season).days, b.position, s.subject_id)
            for s in ds for b in s.boxscores if b.attempts > 0 and ingest.assign_phase(b.date, pc) == 4]
    hits, days, pos, subj = map(list, zip(*rows))
    res = ols_trend(hits, days, pos, subjects=subj)
    b, p = res.coefficient("day:pos[middle]")
    ok = len(rows) >= 300 and abs(b - 0.004) <= 0.001 and p < 0.05
    verdict(10, "OLS planted slope", ok,
            f"middle interaction {b:.5f} (0.0040±0.001), p {p:.2g} (< 0.05), n {len(rows)} (>= 300)")


# ---------------------------------------------------------------- 11 determinism


@pytest.mark.slow
def test_ac11_evaluate_determinism(tmp_path):
    spec = CohortSpec(n_subjects=6, class_proportions=(0.5, 0.5), days_per_phase={2: 6, 3: 4},
                      matches_per_subject=10, seed=5)
    generate_cohort(spec, tmp_path / "data")
    outs = []
    for tag in ("a", "b"):
        code = cli.main(["evaluate", "--data", str(tmp_path / "data"), "--out", str(tmp_path / tag), "--seed", "7"])
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / tag).glob("evaluate_*.csv"))})
        assert code == 0
    same = outs[0] == outs[1] and len(outs[0]) > 0
    verdict(11, "evaluate determinism", same,
            f"{len(outs[0])} metric/prediction CSVs compared byte for byte, identical: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
