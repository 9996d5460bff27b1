"""Shared pytest plumbing: acceptance-verdict collection and reporting.

The acceptance tests record one verdict per criterion via the
``record_verdict`` fixture; a terminal-summary hook prints one line each so
the pass/fail picture survives pytest's output capture.
"""

VERDICTS: dict[int, tuple[bool, str]] = {}


def record_verdict(number: int, passed: bool, detail: str) -> None:
    VERDICTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"CRITERION {number}: {word} - {detail}")
