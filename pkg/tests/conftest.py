"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    n = marker.args[0]
    entry = _CRITERIA.setdefault(n, {"ok": True, "detail": []})
    if report.failed:
        entry["ok"] = False
    for key, value in item.user_properties:
        if key == "detail" and value not in entry["detail"]:
            entry["detail"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}"
        if e["detail"]:
            line += " | " + "; ".join(e["detail"])
        terminalreporter.write_line(line)
