import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion.

    Usage: ``with criterion("3. exact size") as detail: ...``; anything the
    body stores in ``detail`` is printed next to the verdict.
    """
    from contextlib import contextmanager

    @contextmanager
    def _run(name: str):
        detail: dict = {}
        try:
            yield detail
        except BaseException as exc:
            if type(exc).__name__ == "Skipped":
                _ACCEPTANCE.append(f"SKIP  {name}: {exc}")
            else:
                _ACCEPTANCE.append(f"FAIL  {name} {detail or ''}".rstrip())
            raise
        _ACCEPTANCE.append(f"PASS  {name} {detail or ''}".rstrip())

    return _run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
