import contextlib

import pytest

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    table = request.config.stash.setdefault(_CRITERIA, {})

    @contextlib.contextmanager
    def record(number, title):
        try:
            yield
        except BaseException:
            table[number] = f"criterion {number:2d} FAIL {title}"
            print(table[number])
            raise
        table[number] = f"criterion {number:2d} PASS {title}"
        print(table[number])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        terminalreporter.write_line(table[number])
