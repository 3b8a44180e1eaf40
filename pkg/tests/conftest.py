from __future__ import annotations

import pytest

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, title: str, checks: dict[str, bool], detail: str = "") -> None:
        ok = all(bool(v) for v in checks.values())
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        lines.append(line)
        failed = [name for name, v in checks.items() if not v]
        assert ok, f"criterion {number} failed checks: {failed}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
