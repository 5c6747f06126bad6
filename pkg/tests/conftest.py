import os

import numpy as np
import pytest
from hypothesis import settings

from bregman_vi.problems import bundled_problems, bundled_definitions

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PROBLEM_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "problems")
AFFINE_BALLS = ["affine_ball_2", "affine_ball_10", "affine_ball_50"]
TWO_D = ["affine_ball_2_identity", "affine_ball_2_boundary", "affine_ball_2",
         "affine_ball_2_rotated_boundary", "affine_box_2"]


@pytest.fixture(scope="session")
def problems():
    return bundled_problems()


@pytest.fixture(scope="session")
def definitions():
    return bundled_definitions()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def problem_path(name):
    return os.path.join(PROBLEM_DIR, f"{name}.json")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
