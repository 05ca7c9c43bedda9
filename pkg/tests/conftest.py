"""Shared pytest hooks: acceptance criteria report one line each in the summary."""

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance_log(request):
    """Record ``criterion N: PASS|FAIL detail`` lines for the terminal summary."""
    lines = request.config.stash[_LINES]

    def log(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} [{name}]: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
