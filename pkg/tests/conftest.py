import random

import pytest

_VERDICTS: dict[int, tuple[str, str]] = {}


@pytest.fixture
def verdict():
    """Record a one-line outcome for an acceptance criterion; printed after the run."""

    def record(number: int, ok: bool, detail: str = "") -> bool:
        _VERDICTS[number] = ("PASS" if ok else "FAIL", detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        state, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {state}  {detail}".rstrip())


@pytest.fixture
def rng():
    return random.Random(20240611)
