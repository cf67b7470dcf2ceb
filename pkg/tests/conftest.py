"""Shared fixtures: toy populations, cached synthetic populations and runs."""

from __future__ import annotations

import numpy as np
import pytest

from lhiem.engine import ScenarioConfig, build_context, run_simulation
from lhiem.harness import apply_variant
from lhiem.synthpop import generate_population

from helpers import ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def pop100k():
    return generate_population(100_000, seed=0)


@pytest.fixture(scope="session")
def pop20k():
    return generate_population(20_000, seed=4)


@pytest.fixture(scope="session")
def suite_runs(pop100k):
    """15-year runs of the status quo (variant 1) and baseline policy (variant 2)."""
    base = ScenarioConfig(seed=11, snapshots=False)
    ctx = build_context(base, pop100k)
    out = {}
    for vid in (1, 2):
        cfg = apply_variant(base, vid)
        out[vid] = run_simulation(cfg, pop100k, ctx=ctx, keep_oop=True)
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
