from datetime import datetime, timedelta

import numpy as np
import pytest

from mei_dispatch.ingest import FUELS, GridSeries
from mei_dispatch.mei import estimate_mei
from mei_dispatch.synth import SynthParams, synth_generate


@pytest.fixture(scope="session")
def half_year():
    """Default 4380-hour synthetic series with its ground truth."""
    return synth_generate(SynthParams())


@pytest.fixture(scope="session")
def half_year_table(half_year):
    table, _ = estimate_mei(half_year[0])
    return table


def tiny_series(n=5, start="2025-01-01T00:00:00+00:00", seed=0):
    rng = np.random.default_rng(seed)
    t0 = datetime.fromisoformat(start)
    stamps = [t0 + timedelta(hours=i) for i in range(n)]
    gen = {f: rng.uniform(0, 500, n).round(3) for f in FUELS}
    demand = sum(gen.values()) + rng.uniform(0, 1000, n).round(3)
    return GridSeries(stamps, demand, gen, rng.uniform(-300, 300, n).round(3), rng.uniform(-10, 100, n).round(3))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
