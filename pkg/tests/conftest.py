import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dphase.config import default_config
from dphase.energy import Problem, ProblemParams
from dphase.exponents import sample_exponents
from dphase.grid import build_grid

settings.register_profile(
    "dphase", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("dphase")

CONFIGS_DIR = pathlib.Path(__file__).resolve().parents[1] / "configs"
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def accept():
    """Record one ``[criterion] PASS/FAIL detail`` line for the terminal summary."""

    def record(tag: str, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"{tag:<34s} {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])

    return record


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def fixture_exponents(cfg):
    return cfg.build_exponents()


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(3, [(-1.0, 1.0)], 7)


@pytest.fixture(scope="session")
def small_exponents(small_grid):
    return sample_exponents(small_grid, "1.5", "1.8", "1", "2.2")


@pytest.fixture(scope="session")
def small_problem(small_exponents):
    return Problem(small_exponents, ProblemParams(lam=5.0, alpha=0.3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
