"""Shared test plumbing.

The acceptance tests record one PASS/FAIL line per criterion; the
terminal-summary hook replays them after the run so they survive
pytest's output capture.
"""

ACCEPTANCE_LINES = []


def record_acceptance(number: int, name: str, passed: bool, detail: str):
    word = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{number}] {name}: {word} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
