"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().user_properties.append(("criterion", marker.args[0]))


def pytest_runtest_logreport(report):
    names = [v for k, v in report.user_properties if k == "criterion"]
    if not names:
        return
    name = names[0]
    _RESULTS.setdefault(name, True)
    if report.failed or (report.when == "call" and report.skipped):
        _RESULTS[name] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
