import numpy as np
import pytest

from maneuverkit.features import build_dataset
from maneuverkit.synth import GeneratorConfig, class_counts_for, generate_windows
from maneuverkit.sync import FrameTable, FRAME_COLUMNS

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_windows():
    """Ten windows per class at seed 3."""
    cfg = GeneratorConfig(seed=3, class_counts={c: 10 for c in class_counts_for(7)})
    return generate_windows(cfg)


@pytest.fixture(scope="session")
def small_dataset(small_windows):
    return build_dataset(small_windows)


def make_table(n_rows, t0=0.0, **overrides):
    cols = {name: np.zeros(n_rows) for name in FRAME_COLUMNS}
    cols["ground_speed"] = np.full(n_rows, 10.0)
    cols.update(overrides)
    return FrameTable(t0, cols)
