import sys
from pathlib import Path

import pytest

import kernelperc as kp

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def case_grid():
    return kp.build_uniform_grid(1000)


@pytest.fixture(scope="session")
def case_measure(case_grid):
    return kp.make_threshold_measure([(0, 0.1), (2, 0.9)], case_grid)


@pytest.fixture(scope="session")
def case_ctx(case_grid, case_measure):
    return kp.OperatorContext(case_grid, kp.make_case_study_kernel(), case_measure)


@pytest.fixture(scope="session")
def case_picard(case_ctx):
    return kp.solve_picard(case_ctx)


@pytest.fixture(scope="session")
def small_grid():
    return kp.build_uniform_grid(200)


@pytest.fixture(scope="session")
def small_case_ctx(small_grid):
    measure = kp.make_threshold_measure([(0, 0.1), (2, 0.9)], small_grid)
    return kp.OperatorContext(small_grid, kp.make_case_study_kernel(), measure)
