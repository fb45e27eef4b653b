import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config.addinivalue_line("markers", "slow: long-running simulation")


@pytest.fixture
def detail(request):
    """Free-text findings attached to the criterion's summary line."""
    lines = []
    request.node.user_properties.append(("detail", lines))
    return lines


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    notes = [t for k, v in item.user_properties if k == "detail" for t in v]
    _RESULTS[number] = (title, rep.passed, "; ".join(notes))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, notes = _RESULTS[number]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({notes})" if notes else ""))
