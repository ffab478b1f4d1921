import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_results = []


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "NOT RUN"}[report.outcome]
        doc = report.user_properties and dict(report.user_properties).get("criterion")
        _results.append((label, doc or report.nodeid))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, name in _results:
        terminalreporter.write_line(f"[{label:7}] {name}")
