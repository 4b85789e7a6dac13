import re

import pytest

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
_ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_NAME = re.compile(r"test_criterion_(\d+)_")


@pytest.fixture()
def criterion(request):
    """``criterion(ok, detail)`` records the outcome for the summary, then asserts it."""
    m = _NAME.search(request.node.name)
    number = int(m.group(1))

    def record(ok: bool, detail: str):
        _ACCEPTANCE[number] = (bool(ok), detail)
        assert ok, detail

    return record


def pytest_runtest_logreport(report):
    # a criterion that crashed before recording still gets a line
    m = _NAME.search(report.nodeid)
    if m and report.when == "call" and report.failed and int(m.group(1)) not in _ACCEPTANCE:
        _ACCEPTANCE[int(m.group(1))] = (False, f"error: {report.longreprtext.splitlines()[-1][:160]}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
