"""Command-line entry point: ``vbperf <subcommand> [options]``.

Settings come from an optional TOML file (``--config``) holding the keys
of ``RunConfig``; command-line flags override it.  Every run writes a
manifest and names each output after the hash of its resolved config.

Exit status: 0 success, 1 usage error, 2 data validation error, 3 internal
error.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__, evaluation, features, ingest, labels, models, selection, synth
from .stats import correlation, trend

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("vbperf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ALL_COMBINATIONS = tuple(",".join(map(str, c)) for r in (1, 2, 3) for c in combinations((1, 2, 3), r))
MODEL_NAMES = tuple(sorted(models.PROFILES))


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    data: str = "data"
    phase_config: str = ""
    phases: list = field(default_factory=lambda: ["2,3"])
    model: list = field(default_factory=lambda: ["gbt"])
    timezone: str = "UTC"
    min_readings: int = ingest.MIN_HR_READINGS
    hit_threshold: float = labels.HIT_THRESHOLD
    weighting: str = "match"
    collinearity: float = 0.7
    alpha: float = 0.05
    smote: bool = True
    smote_k: int = 5
    tune_budget: int = 0
    iterations: int = 10
    seed: int = 0
    out: str = "out"

    def validate(self, needs_phases=False):
        if not 0 < self.collinearity <= 1:
            raise UsageError("collinearity must lie in (0, 1]")
        if not 0 < self.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")
        if not -1 <= self.hit_threshold <= 1:
            raise UsageError("hit threshold must lie in [-1, 1]")
        if self.min_readings < 0:
            raise UsageError("min readings must be >= 0")
        if self.smote_k < 1 or self.iterations < 1 or self.tune_budget < 0:
            raise UsageError("smote-k and iterations must be >= 1, tune budget >= 0")
        if self.weighting not in ("match", "attempts"):
            raise UsageError("weighting must be 'match' or 'attempts'")
        for m in self.model:
            if m not in models.PROFILES:
                raise UsageError(f"unknown model {m!r}; choose from {', '.join(MODEL_NAMES)}")
        if needs_phases and not self.phases:
            raise UsageError("phase selection must not be empty")
        for combo in self.phases:
            try:
                ingest.parse_phase_selection(combo)
            except ValueError as exc:
                raise UsageError(f"phase combination {combo!r}: {exc}") from None

    def digest(self, command):
        doc = {k: v for k, v in asdict(self).items() if k != "out"}
        doc["command"] = command
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _phase_list(text):
    if text.strip().lower() == "all":
        return list(ALL_COMBINATIONS)
    return [text]


def _common(parser, pipeline=True):
    parser.add_argument("--config", help="TOML file with RunConfig keys")
    parser.add_argument("--data", help="dataset root")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--timezone")
    if not pipeline:
        return
    parser.add_argument("--phase-config", dest="phase_config", help="TOML phase file (default: Table I dates)")
    parser.add_argument("--phases", action="append", type=_phase_list,
                        help='comma-joined phase ids such as "2,3", or "all"; repeatable')
    parser.add_argument("--min-readings", dest="min_readings", type=int)
    parser.add_argument("--hit-threshold", dest="hit_threshold", type=float)
    parser.add_argument("--weighting", choices=("match", "attempts"))
    parser.add_argument("--collinearity", type=float)
    parser.add_argument("--alpha", type=float)


def build_parser():
    parser = _Parser(prog="vbperf", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--version", action="version", version=f"vbperf {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    for name, helptext in (("ingest", "validate raw files and apply the compliance filter"),
                           ("featurize", "write the subject-day feature matrix"),
                           ("label", "write season hit averages and classes"),
                           ("select", "collinearity filter and F-test report")):
        _common(sub.add_parser(name, help=helptext))

    ev = sub.add_parser("evaluate", help="bootstrapped leave-one-subject-out evaluation")
    _common(ev)
    ev.add_argument("--model", action="append", help=f"one of {', '.join(MODEL_NAMES)}; repeatable")
    ev.add_argument("--iterations", type=int)
    smote_grp = ev.add_mutually_exclusive_group()
    smote_grp.add_argument("--smote", dest="smote", action="store_true", default=None)
    smote_grp.add_argument("--no-smote", dest="smote", action="store_false", default=None)
    ev.add_argument("--smote-k", dest="smote_k", type=int)
    ev.add_argument("--tune-budget", dest="tune_budget", type=int)

    st = sub.add_parser("stats", help="correlation tables and season trend")
    _common(st)
    st.add_argument("--permutations", type=int, default=0)

    rp = sub.add_parser("report", help="selection, evaluation, statistics and plot series")
    _common(rp)
    rp.add_argument("--model", action="append")
    rp.add_argument("--iterations", type=int)

    sy = sub.add_parser("synth", help="generate a synthetic cohort")
    _common(sy, pipeline=False)
    sy.add_argument("--subjects", type=int, default=14)
    sy.add_argument("--poor-fraction", dest="poor_fraction", type=float, default=3 / 14)
    sy.add_argument("--days", default="2:46,3:10", help='days per phase, e.g. "2:46,3:10"')
    sy.add_argument("--matches", type=int, default=25)
    sy.add_argument("--null", action="store_true", help="no planted class effect")
    sy.add_argument("--stress-coupling", dest="stress_class", type=float, default=0.0)
    sy.add_argument("--spo2-coupling", dest="spo2_hits", type=float, default=0.0)
    sy.add_argument("--performance-coupling", dest="performance_hits", type=float, default=0.0)
    sy.add_argument("--noncompliant-rate", dest="noncompliant_rate", type=float, default=0.0)
    return parser


def resolve_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file {args.config} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in doc.items():
            if k in ("phases", "model") and isinstance(v, str):
                v = _phase_list(v) if k == "phases" else [v]
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        if f.name == "phases":
            v = [combo for group in v for combo in group]
        setattr(cfg, f.name, v)
    if getattr(args, "smote", None) is False and getattr(args, "smote_k", None) is not None:
        raise UsageError("--no-smote conflicts with --smote-k")
    if any(not str(p).strip() for p in cfg.phases):
        raise UsageError("phase selection must not be empty")
    try:
        cfg.phases = [",".join(map(str, ingest.parse_phase_selection(p))) for p in cfg.phases]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------- run plumbing


@contextmanager
def output_lock(out):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".vbperf.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"{out} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def write_manifest(out, command, cfg, digest, outputs):
    import pandas

    doc = {
        "command": command,
        "config": asdict(cfg),
        "config_hash": digest,
        "seed": cfg.seed,
        "outputs": sorted(outputs),
        "versions": {"vbperf": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "pandas": pandas.__version__},
        "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    path = out / f"manifest_{command}_{digest}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


class Run:
    """Shared state of one invocation: config, loaded data, outputs written."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.digest = cfg.digest(command)
        self.out = Path(cfg.out)
        self.outputs = []
        self._dataset = None
        self._report = None

    def path(self, stem, ext="csv"):
        p = self.out / f"{stem}_{self.digest}.{ext}"
        self.outputs.append(p.name)
        return p

    def phase_config(self):
        if not self.cfg.phase_config:
            return ingest.PhaseConfig(timezone=self.cfg.timezone)
        try:
            pc = ingest.load_phase_config(self.cfg.phase_config)
        except FileNotFoundError:
            raise DataError(f"phase config {self.cfg.phase_config} not found") from None
        except (ValueError, KeyError, tomllib.TOMLDecodeError) as exc:
            raise DataError(f"phase config {self.cfg.phase_config}: {exc}") from None
        return ingest.PhaseConfig(pc.phases, self.cfg.timezone)

    def dataset(self):
        if self._dataset is None:
            root = Path(self.cfg.data)
            if not root.is_dir():
                raise DataError(f"data root {root} does not exist")
            raw = ingest.load_dataset(root, timezone=self.cfg.timezone)
            if len(raw) == 0:
                raise DataError(f"no subjects found under {root}")
            self._dataset, self._report = ingest.hr_compliance_filter(raw, self.cfg.min_readings)
            self._raw_diagnostics = raw.diagnostics
        return self._dataset

    def labels(self):
        ds = self.dataset()
        return labels.season_labels({s.subject_id: s.boxscores for s in ds},
                                    self.cfg.hit_threshold, self.cfg.weighting)

    def phase_union(self):
        return sorted({p for combo in self.cfg.phases for p in ingest.parse_phase_selection(combo)})

    def matrix(self):
        m = features.build_matrix(self.dataset(), self.phase_union(), self.phase_config())
        if len(m) == 0:
            raise DataError("no compliant subject-days fall inside the selected phases")
        return m

    def labeled(self, matrix=None):
        lm, info = labels.label_matrix(self.matrix() if matrix is None else matrix, self.labels())
        if len(lm) == 0:
            raise DataError("no labeled subject-days")
        return lm


def _subset(matrix, combo):
    wanted = set(ingest.parse_phase_selection(combo))
    return matrix.take(np.flatnonzero(np.isin(matrix.phases, list(wanted))))


# ---------------------------------------------------------------- subcommands


def cmd_ingest(run):
    ds = run.dataset()
    with open(run.path("ingest_diagnostics"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "line", "message"])
        for d in run._raw_diagnostics:
            w.writerow([d.path, d.line, d.message])
    with open(run.path("ingest_days"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "date", "status"])
        for sid in sorted(set(run._report.retained) | set(run._report.excluded)):
            rows = [(d, "retained") for d in run._report.retained.get(sid, [])]
            rows += [(d, "excluded") for d in run._report.excluded.get(sid, [])]
            for d, status in sorted(rows):
                w.writerow([sid, d.isoformat(), status])
    for sid, (excluded, retained) in run._report.counts().items():
        print(f"{sid}: {retained} days retained, {excluded} excluded")
    print(f"{len(ds)} subjects, {len(run._raw_diagnostics)} rejected rows")


def cmd_featurize(run):
    m = run.matrix()
    features.write_matrix_csv(m, run.path("features"))
    print(f"{len(m)} subject-days x {len(m.feature_names)} features")


def cmd_label(run):
    labs = run.labels()
    labels.write_labels_csv(labs, run.path("labels"))
    counts = np.bincount([lab.label for lab in labs.values()], minlength=2)
    print(f"good: {counts[labels.GOOD]}  poor: {counts[labels.POOR]}")


def _selection(run, matrix, combo):
    lm = run.labeled(_subset(matrix, combo))
    if np.unique(lm.y).size < 2:
        raise DataError(f"phases {combo}: labeled rows hold a single class")
    _, report = selection.select_matrix(lm, run.cfg.collinearity, run.cfg.alpha)
    return lm, report


def cmd_select(run):
    matrix = run.matrix()
    for combo in run.cfg.phases:
        tag = combo.replace(",", "")
        _, report = _selection(run, matrix, combo)
        selection.write_selection_csv(report, run.path(f"selection_p{tag}"))
        text = selection.format_selection_table(report, run.cfg.alpha)
        run.path(f"selection_p{tag}", "txt").write_text(text + "\n")
        print(f"phases {combo}: kept {len(report.kept)} features")
        print(text)


def _evaluate(run, matrix):
    cfg = run.cfg
    pipe = evaluation.PipelineConfig(cfg.collinearity, cfg.alpha, cfg.smote, cfg.smote_k, cfg.tune_budget)
    rows = []
    for combo in cfg.phases:
        lm = run.labeled(_subset(matrix, combo))
        tag = combo.replace(",", "")
        for name in cfg.model:
            spec = models.ModelSpec.from_profile(name, cfg.seed)
            report = evaluation.bootstrap_loso(lm, spec, pipe, cfg.seed, cfg.iterations)
            evaluation.write_iterations_csv(report, run.path(f"evaluate_p{tag}_{name}_iterations"))
            for i, res in enumerate(report.predictions):
                evaluation.write_predictions_csv(res, run.path(f"evaluate_p{tag}_{name}_predictions_{i}"))
            rows.append((combo, name, len(lm), report))
    evaluation.write_summary_csv(rows, run.path("evaluate_summary"))
    head = f"{'phases':<8}{'model':<6}{'days':>6}" + "".join(f"{m:>17}" for m in evaluation.METRIC_NAMES)
    print(head)
    for combo, name, days, report in rows:
        s = report.summary()
        print(f"{combo:<8}{name:<6}{days:>6}" + "".join(f"{s[m]:>17}" for m in evaluation.METRIC_NAMES))
    return rows


def cmd_evaluate(run):
    _evaluate(run, run.matrix())


def _match_table(ds, phase_config):
    rows = []
    season = {pid: start for pid, start, _ in phase_config.phases}.get(4)
    for subj in ds:
        for b in subj.boxscores:
            if b.attempts == 0 or ingest.assign_phase(b.date, phase_config) != 4:
                continue
            rows.append((subj.subject_id, b.position, b.date, (b.date - season).days, b.hit_percentage))
    return rows


def _stats(run):
    ds = run.dataset()
    pc = run.phase_config()
    kw = {"permutations": getattr(run, "permutations", 0), "seed": run.cfg.seed}
    labs = run.labels()
    outputs = {}
    with open(run.path("stats_ema_vs_season"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "variable", "p", "rho", "n"])
        for pid in (1, 2, 3, 4):
            entries = correlation.ema_vs_season(ds, (pid,), labs, pc, run.cfg.alpha, full=True, **kw)
            for e in correlation.sort_entries(entries, "abs_rho"):
                w.writerow([pid, e.variable, repr(e.p), repr(e.rho), e.n])
            sig = [e for e in entries if e.p < run.cfg.alpha]
            outputs[f"EMA vs season average, phase {pid}"] = correlation.format_correlation_table(
                correlation.sort_entries(sig, "abs_rho"), correlation.EMA_DISPLAY)

    box = correlation.perceived_vs_box_metrics(ds, "performance", 4, pc, **kw)
    correlation.write_correlation_csv(box, run.path("stats_perceived_vs_box"))
    outputs["Perceived performance vs box-score metrics (phase 4)"] = correlation.format_correlation_table(
        box, correlation.BOX_DISPLAY)

    ema_hits = correlation.daily_hits_vs(ds, ingest.EMA_ITEMS, 4, None, pc, **kw)
    correlation.write_correlation_csv(correlation.sort_entries(ema_hits, "abs_rho"), run.path("stats_hits_vs_ema"))
    outputs["Match-day hit percentage vs EMA (phase 4)"] = correlation.format_correlation_table(
        correlation.sort_entries([e for e in ema_hits if e.p < run.cfg.alpha], "abs_rho"), correlation.EMA_DISPLAY)

    matrix = features.build_matrix(ds, (4,), pc)
    if len(matrix):
        sensor = correlation.daily_hits_vs(ds, matrix.feature_names, 4, matrix, pc, **kw)
        correlation.write_correlation_csv(correlation.sort_entries(sensor, "abs_rho"),
                                          run.path("stats_hits_vs_sensors"))
        outputs["Match-day hit percentage vs sensor features (phase 4)"] = correlation.format_correlation_table(
            correlation.sort_entries([e for e in sensor if e.p < run.cfg.alpha], "abs_rho"),
            features.display_name)

    matches = _match_table(ds, pc)
    res = None
    if len(matches) >= 3:
        subj, pos, _, day, hit = zip(*matches)
        res = trend.ols_trend(hit, day, pos, subjects=subj)
        with open(run.path("stats_trend"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["term", "estimate", "se", "p"])
            for nm, b, s, p in zip(res.names, res.coef, res.se, res.p):
                w.writerow([nm, repr(float(b)), repr(float(s)), repr(float(p))])
            for lv, (b, s, p) in res.position_slopes.items():
                w.writerow([f"slope[{lv}]", repr(b), repr(s), repr(p)])
            w.writerow(["mean_player_slope", repr(res.mean_slope), "", repr(res.mean_slope_p)])
        outputs["Season trend"] = trend.format_trend(res)
    text = "\n\n".join(f"{k}\n{v}" for k, v in outputs.items())
    run.path("stats", "txt").write_text(text + "\n")
    print(text)
    return matches, res


def cmd_stats(run):
    _stats(run)


def cmd_report(run):
    matrix = run.matrix()
    for combo in run.cfg.phases:
        tag = combo.replace(",", "")
        _, report = _selection(run, matrix, combo)
        selection.write_selection_csv(report, run.path(f"selection_p{tag}"))
        run.path(f"selection_p{tag}", "txt").write_text(
            selection.format_selection_table(report, run.cfg.alpha) + "\n")
    _evaluate(run, matrix)
    matches, res = _stats(run)
    if res is None:
        return
    # plot-ready series: per-match hits and the fitted line per position
    coef = dict(zip(res.names, res.coef))
    with open(run.path("report_hit_trend"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "position", "date", "day", "hit_percentage"])
        for s, p, d, t, h in sorted(matches):
            w.writerow([s, p, d.isoformat(), t, repr(float(h))])
    days = sorted({m[3] for m in matches})
    with open(run.path("report_trend_fit"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "day", "fitted"])
        for lv in sorted(res.position_slopes):
            base = coef["intercept"] + coef.get(f"pos[{lv}]", 0.0)
            slope = res.position_slopes[lv][0]
            for t in (days[0], days[-1]):
                w.writerow([lv, t, repr(float(base + slope * t))])


def cmd_synth(args):
    out = Path(args.out or "cohort")
    try:
        days = {int(k): int(v) for k, v in (part.split(":") for part in args.days.split(",") if part)}
    except ValueError:
        raise UsageError(f"bad --days value {args.days!r}") from None
    kw = dict(n_subjects=args.subjects, class_proportions=(1 - args.poor_fraction, args.poor_fraction),
              days_per_phase=days, matches_per_subject=args.matches, seed=args.seed or 0,
              stress_class=args.stress_class, spo2_hits=args.spo2_hits,
              performance_hits=args.performance_hits, noncompliant_rate=args.noncompliant_rate)
    try:
        spec = synth.CohortSpec.null(**kw) if args.null else synth.CohortSpec(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if out.exists() and any(out.iterdir()):
        raise UsageError(f"{out} is not empty")
    truth = synth.generate_cohort(spec, out)
    c = truth["class_counts"]
    print(f"wrote {spec.n_subjects} subjects to {out} (good {c['good']}, poor {c['poor']})")


COMMANDS = {
    "ingest": (cmd_ingest, False),
    "featurize": (cmd_featurize, True),
    "label": (cmd_label, False),
    "select": (cmd_select, True),
    "evaluate": (cmd_evaluate, True),
    "stats": (cmd_stats, False),
    "report": (cmd_report, True),
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "synth":
            cmd_synth(args)
            return EXIT_OK
        cfg = resolve_config(args)
        func, needs_phases = COMMANDS[args.command]
        cfg.validate(needs_phases)
        run = Run(args.command, cfg)
        run.permutations = getattr(args, "permutations", 0)
        with output_lock(run.out):
            func(run)
            write_manifest(run.out, args.command, cfg, run.digest, run.outputs)
        return EXIT_OK
    except UsageError as exc:
        print(f"vbperf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (DataError, FileNotFoundError) as exc:
        print(f"vbperf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"vbperf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"vbperf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
