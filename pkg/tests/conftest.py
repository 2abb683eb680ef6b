import pytest

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = mark.args
        detail = dict(report.user_properties).get("detail", "")
        if report.failed:
            detail = (detail + " | " if detail else "") + str(call.excinfo.value).splitlines()[0][:120]
        _CRITERIA[number] = {"title": title, "outcome": report.outcome, "detail": detail}


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        c = _CRITERIA[number]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[c["outcome"]]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {c['title']}: {c['detail']}")
