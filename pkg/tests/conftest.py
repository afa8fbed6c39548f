"""Shared pytest plumbing: surface acceptance verdict lines in the summary."""

ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance verdicts")
    for line in ACCEPTANCE_VERDICTS:
        terminalreporter.write_line(line)
