from __future__ import annotations

import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hddcm.beam import Beam
from hddcm.experiments import ExperimentSpec
from hddcm.quickshot import run

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_KEY = pytest.StashKey[list]()


@functools.lru_cache(maxsize=None)
def quickshot(obstacle: str, material: str, gamma: float):
    """Quick-shot run shared across test modules; runs are deterministic."""
    spec = ExperimentSpec(obstacle, material, gamma)
    model = spec.model()
    return spec, model, run(model, spec.settings())


@pytest.fixture(scope="session")
def beam() -> Beam:
    return Beam()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240617)


@pytest.fixture
def acceptance_log(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)
