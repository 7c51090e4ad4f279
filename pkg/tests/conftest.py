import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


class _Recorder:
    def __call__(self, number: int, ok: bool, detail: str) -> None:
        _CRITERIA[number] = (ok, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
