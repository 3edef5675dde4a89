"""Collects acceptance outcomes and prints one line per criterion after the run."""

import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def acceptance():
    def report(cid: str, passed: bool, detail: str, seconds: float) -> bool:
        _ACCEPTANCE[cid] = f"{cid} {'PASS' if passed else 'FAIL'}  {detail}  ({seconds:.2f} s)"
        print(_ACCEPTANCE[cid])
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c[1:])):
        terminalreporter.write_line(_ACCEPTANCE[cid])
