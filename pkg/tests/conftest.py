import pytest

_outcomes: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__ != "test_acceptance":
        return
    if report.failed or (report.when == "call" and item.name not in _outcomes):
        _outcomes[item.name] = "FAIL" if report.failed else "PASS"
    elif report.skipped:
        _outcomes[item.name] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA
    except ImportError:
        return
    if not _outcomes:
        return
    terminalreporter.section("acceptance")
    for name, title in CRITERIA.items():
        terminalreporter.write_line(f"{_outcomes.get(name, 'NOT RUN'):7} criterion {title}")
