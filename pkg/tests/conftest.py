import pytest

from denaturefit.model import LemForm, ModelConstants
from denaturefit.rng import GaussianNoise
from denaturefit.synth import nine_standard


@pytest.fixture(scope="session")
def standard_sets():
    return nine_standard(1)


@pytest.fixture(scope="session")
def center_set(standard_sets):
    # m=6, d50=4 cell of the grid
    return standard_sets[4]


@pytest.fixture(scope="session")
def noiseless_sets():
    return nine_standard(1, GaussianNoise(0.0))


@pytest.fixture
def rt():
    return ModelConstants().rt


ALL_FORMS = list(LemForm)


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
