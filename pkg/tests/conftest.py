import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request):
    """Record one acceptance line; ``soft`` lines are reported but never fail the run."""
    lines = request.config.stash[_LINES]

    def _record(criterion: str, ok: bool, detail: str, soft: bool = False) -> bool:
        tag = ("PASS" if ok else "FAIL") + (" (soft)" if soft else "")
        lines.append(f"[{tag}] {criterion}: {detail}")
        print(lines[-1])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
