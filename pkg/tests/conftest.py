"""Shared fixtures and the acceptance-criteria terminal summary.

Every test in ``test_acceptance.py`` is one acceptance criterion; the
hooks below collect their outcomes and print one PASS/FAIL/SKIP line per
criterion at the end of the run so the gate is readable at a glance.
"""

from __future__ import annotations

import re

import numpy as np
import pytest

from fable import Dataset, generate_synthetic, default_synthetic_spec

_ACCEPTANCE: dict[str, str] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        if report.skipped:
            _ACCEPTANCE[name] = "SKIP"
        else:
            _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and (report.skipped or report.failed):
        _ACCEPTANCE[name] = "SKIP" if report.skipped else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE.items()):
        match = _CRITERION.match(name)
        if match:
            label = f"criterion {match.group(1)} ({match.group(2).replace('_', ' ')})"
        else:
            label = name
        terminalreporter.write_line(f"{label}: {outcome}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_dataset():
    """Hand-sized dataset: 4 items, 3 LFs, 2 classes, one abstain each."""
    return Dataset(
        features=np.array([[0.0, 1.0], [0.2, 0.9], [1.0, 0.1], [0.9, -0.2]]),
        lf_labels=np.array(
            [
                [0, 0, -1],
                [0, -1, 0],
                [1, 1, -1],
                [-1, 1, 1],
            ]
        ),
        num_classes=2,
        gold=np.array([0, 0, 1, 1]),
        name="tiny",
    )


@pytest.fixture
def small_synthetic():
    """A 240-item draw of the default benchmark, cheap enough for any fit."""
    return generate_synthetic(default_synthetic_spec(size=240, seed=7))


def random_dataset(seed: int, n: int = 60, n_lfs: int = 5, k: int = 3, abstain_rate: float = 0.35) -> Dataset:
    """Generic random dataset: Gaussian features and noisy correlated votes."""
    rng = np.random.default_rng(seed)
    gold = rng.integers(0, k, size=n)
    features = rng.standard_normal((n, 3)) + gold[:, None]
    votes = np.where(
        rng.random((n, n_lfs)) < 0.6,
        gold[:, None],
        rng.integers(0, k, size=(n, n_lfs)),
    )
    votes = np.where(rng.random((n, n_lfs)) < abstain_rate, -1, votes)
    return Dataset(
        features=features,
        lf_labels=votes,
        num_classes=k,
        gold=gold,
        name=f"random-{seed}",
    )
