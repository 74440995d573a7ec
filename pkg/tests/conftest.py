import numpy as np
import pytest

from radial_shooter import classify as cl
from radial_shooter.experiments import load_golden
from radial_shooter.functionals import functional_params
from radial_shooter.nonlinearity import PowerDifference, make_nonlinearity


@pytest.fixture(scope="session")
def nl():
    """The default model s^3 - s."""
    return make_nonlinearity(PowerDifference(3.0))


@pytest.fixture(scope="session")
def cparams():
    return cl.classification_params()


@pytest.fixture(scope="session")
def fparams():
    return functional_params()


@pytest.fixture(scope="session")
def golden_states():
    return load_golden("golden_bound_states.json")["states"]


@pytest.fixture(scope="session")
def alpha_star1(golden_states):
    return golden_states["1"]["alpha_star"]


@pytest.fixture
def rng():
    return np.random.default_rng(20231016)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion
# ---------------------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = mark.args
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{verdict}  {number:>2}. {title}  ({seconds:.2f} s)")
