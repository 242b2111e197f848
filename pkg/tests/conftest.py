"""Collects the acceptance verdicts and prints them after the run."""

from __future__ import annotations

VERDICTS: dict[int, tuple[bool, str]] = {}


def record(number: int, passed: bool, summary: str) -> None:
    VERDICTS[number] = (passed, summary)
    print(f"\ncriterion {number:2d}: {'PASS' if passed else 'FAIL'}  {summary}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, summary = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {summary}")
