"""Acceptance bookkeeping: tests marked ``criterion(n, title)`` get one
PASS/FAIL line each in the terminal summary, with any details they recorded."""

import pytest

_RESULTS = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def record(request):
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0] if marker else request.node.nodeid

    def add(text):
        _DETAILS.setdefault(key, []).append(str(text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _RESULTS[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status = _RESULTS[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title}")
        for line in _DETAILS.get(number, []):
            terminalreporter.write_line(f"    {line}")
