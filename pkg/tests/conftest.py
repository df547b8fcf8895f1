import json

import numpy as np
import pytest

from torusflow.config import parse_config
from torusflow.experiment import run_experiment, write_report
from torusflow.fields import GridSpec, ScalarField

ACCEPTANCE_LINES = []

SUPERSIZE_CONFIG = {
    "i_list": [1, 2, 3],
    "n": 256,
    "t_end": 1.0,
    "t_star": 0.2,
    "points_kind": "halton",
    "points_count": 64,
    "stencil_radius": 2,
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(n, rng, lo=1.0, hi=2.0):
    return ScalarField(GridSpec(n), rng.uniform(lo, hi, size=(n, n)))


@pytest.fixture(scope="session")
def supersize_report(tmp_path_factory):
    """Full pipeline for i = 1, 2, 3 at n = 256, shared by the acceptance and plot tests."""
    cfg = parse_config(json.dumps(SUPERSIZE_CONFIG))
    out = tmp_path_factory.mktemp("supersize")
    report = run_experiment(cfg)
    write_report(report, out)
    return report, out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
