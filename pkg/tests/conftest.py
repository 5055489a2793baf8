import numpy as np
import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for number, title in _marks.get(report.nodeid, ()):
        ok, _ = _criteria.get(number, (True, title))
        _criteria[number] = (ok and report.passed, title)


_marks = {}


def pytest_collection_modifyitems(items):
    for item in items:
        for m in item.iter_markers("criterion"):
            _marks.setdefault(item.nodeid, []).append(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}")
