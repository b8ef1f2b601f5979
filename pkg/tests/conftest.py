import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = {"number": mark.args[0], "title": mark.args[1], "state": None}


def pytest_runtest_logreport(report):
    entry = _criteria.get(report.nodeid)
    if entry is None:
        return
    if report.failed:
        entry["state"] = "FAIL"
    elif report.skipped:
        entry["state"] = "SKIP"
    elif report.when == "call" and entry["state"] is None:
        entry["state"] = "PASS"
    entry["detail"] = dict(report.user_properties).get("detail", "")


def pytest_terminal_summary(terminalreporter):
    ran = sorted((e for e in _criteria.values() if e["state"]), key=lambda e: e["number"])
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for e in ran:
        line = f"criterion {e['number']:>2d}: {e['state']}  {e['title']}"
        if e.get("detail"):
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def record(text):
        request.node.user_properties.append(("detail", text))
    return record
