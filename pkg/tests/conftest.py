import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        passed = report.passed
        prev = _RESULTS.get(number)
        detail = getattr(item, "acceptance_detail", "")
        if prev is not None:
            passed = prev[1] and passed
            detail = "; ".join(d for d in (prev[2], detail) if d)
        _RESULTS[number] = (title, passed, detail)


@pytest.fixture
def record(request):
    """Attach a one-line measurement summary to the criterion's result line."""

    def _record(text):
        request.node.acceptance_detail = text

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, detail = _RESULTS[number]
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
