import pytest

_LINES: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """record(number, ok, detail): log one acceptance check, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        _LINES.setdefault(str(number), []).append((bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES, key=int):
        parts = _LINES[number]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
