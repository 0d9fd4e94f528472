import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion and assert it."""

    def _verdict(number: int, title: str, checks: list[tuple[str, bool]]):
        ok = all(c for _, c in checks)
        detail = "; ".join(f"{d} [{'ok' if c else 'FAIL'}]" for d, c in checks)
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
