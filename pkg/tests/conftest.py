import pytest

_RESULTS = {}


@pytest.fixture
def record():
    """Store ``(passed, detail)`` for a numbered acceptance criterion."""
    def _record(number, passed, detail=""):
        prev = _RESULTS.get(number)
        # a criterion with several parts passes only if every part does
        ok = bool(passed) and (prev is None or prev[0])
        text = detail if prev is None else f"{prev[1]}; {detail}"
        _RESULTS[number] = (ok, text)
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
