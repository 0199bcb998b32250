import re

_CRITERIA = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match:
        return
    key = int(match.group(1))
    if report.when == "call" or report.outcome != "passed":
        # a setup or teardown failure also counts against the criterion
        if report.outcome == "failed" or key not in _CRITERIA:
            _CRITERIA[key] = (match.group(2), report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        name, outcome, duration = _CRITERIA[key]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {key:2d} {status}  {name.replace('_', ' ')}  ({duration:.1f}s)")
