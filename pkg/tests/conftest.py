"""Collects acceptance verdicts and prints them after the run."""

import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    def report(number: int, title: str, ok: bool, detail: str) -> None:
        _RESULTS[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        print(_RESULTS[number])
        assert ok, _RESULTS[number]

    return report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number])
