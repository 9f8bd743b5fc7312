import numpy as np
import pytest

from streamcov.network import Edge, Network, random_tree


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ytree():
    """Outlet o, junction j, two leaves: e1 (len 2, omega 3) and e2 (len 1, omega 1) join e3 (len 1.5, omega 4)."""
    return Network(
        [Edge("e1", "l1", "j", 2.0, 3.0), Edge("e2", "l2", "j", 1.0, 1.0), Edge("e3", "j", "o", 1.5, 4.0)],
        outlet="o",
    )


@pytest.fixture
def triangle():
    return Network([Edge("a", "x", "y", 1.0), Edge("b", "y", "z", 1.0), Edge("c", "z", "x", 1.0)])


@pytest.fixture
def small_tree(rng):
    return random_tree(8, rng)


# -- acceptance reporting -----------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = getattr(report, "criterion", None)
    if marks is None:
        return
    number, title = marks
    outcome = "PASS" if report.outcome == "passed" else "FAIL"
    _CRITERIA[number] = (outcome, title, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, title, secs = _CRITERIA[number]
        terminalreporter.write_line(f"{outcome} criterion {number}: {title} ({secs:.1f}s)")
