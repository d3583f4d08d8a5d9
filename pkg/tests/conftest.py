import pathlib
import re
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if m and report.when == "call":
        num = int(m.group(1))
        outcome = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE[num] = (outcome, report.nodeid.split("::")[-1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        outcome, name = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {outcome}  ({name})")
