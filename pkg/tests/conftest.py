"""Shared pytest plumbing: the acceptance scoreboard.

Acceptance tests record one line per criterion; printing happens in the
terminal-summary hook so the scoreboard survives output capture and shows
up in every run, passing or failing.
"""

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
