"""Shared fixtures plus the acceptance summary printed after the run."""

from __future__ import annotations

import numpy as np
import pytest

from greedyprune.data import Dataset

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_data() -> Dataset:
    rng = np.random.default_rng(123)
    X = rng.uniform(size=(60, 4))
    y = 3.0 * X[:, 0] + np.sin(4.0 * X[:, 1]) + 0.1 * rng.normal(size=60)
    return Dataset.from_arrays(X, y)
