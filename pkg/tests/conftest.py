import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


class _Recorder:
    def __call__(self, name: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        print(line)
        _ACCEPTANCE.append((name, bool(ok), detail))
        assert ok, line


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome and fail the test if it did not pass."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}"
                                    + (f": {detail}" if detail else ""))
