import json

import pytest

from vbperf import ingest, labels
from vbperf.features import build_matrix
from vbperf.synth import CohortSpec, generate_cohort

SMALL = dict(n_subjects=5, class_proportions=(0.6, 0.4), days_per_phase={2: 3, 3: 2},
             matches_per_subject=8, seed=11)


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory):
    """A five-subject cohort with five sensor days each, written once per session."""
    root = tmp_path_factory.mktemp("cohort")
    generate_cohort(CohortSpec(**SMALL), root)
    return root, json.loads((root / "truth.json").read_text())


@pytest.fixture(scope="session")
def small_dataset(small_cohort):
    root, _ = small_cohort
    return ingest.load_dataset(root)


@pytest.fixture(scope="session")
def small_labeled(small_dataset):
    filtered, _ = ingest.hr_compliance_filter(small_dataset)
    labs = labels.season_labels({s.subject_id: s.boxscores for s in filtered})
    matrix = build_matrix(filtered, (2, 3))
    labeled, _ = labels.label_matrix(matrix, labs)
    return labeled, labs


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[0][3:])):
        terminalreporter.write_line(line)
