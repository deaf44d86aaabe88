import re

_acceptance: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    detail = dict(report.user_properties).get("detail", "")
    _acceptance.append((m.group(1), "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, outcome, detail in sorted(_acceptance, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"criterion {int(num):>2}: {outcome}  {detail}")
