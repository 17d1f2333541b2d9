import functools

import pytest

from fracheat import assemble, build_grid, eigendecompose

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record(request):
    """Log one pass/fail line for the acceptance summary and echo it."""
    lines = request.config.stash[ACCEPTANCE]

    def _record(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return _record


@functools.lru_cache(maxsize=None)
def eig_for(kind, s, n=256, dim=1):
    return eigendecompose(assemble(kind, build_grid(dim, n), s))
