"""Shared test plumbing: surface acceptance PASS/FAIL lines in the summary."""
import sys
from pathlib import Path

# make sibling helper modules (oracles.py) importable from any rootdir
sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
