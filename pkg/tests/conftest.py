"""Collects acceptance-gate verdict lines and echoes them after the run.

The acceptance tests call `register_verdict` once per criterion; printing
the lines from a `pytest_terminal_summary` hook keeps them visible in a
plain `pytest -v` run, where pytest's fd-level capture would otherwise
swallow anything printed inside a passing test.
"""

_verdicts = []


def register_verdict(line: str):
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for line in _verdicts:
        terminalreporter.write_line(line)
