from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def G3():
    from gmix.group import sl2_build

    return sl2_build(3)


@pytest.fixture(scope="session")
def G2():
    from gmix.group import sl2_build

    return sl2_build(2)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per criterion; fails the test if any clause fails."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, title: str, clauses: dict[str, bool], **info) -> None:
        ok = all(clauses.values())
        parts = [f"{k}={'ok' if v else 'FAIL'}" for k, v in clauses.items()]
        parts += [f"{k}={v}" for k, v in info.items()]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} [{'; '.join(parts)}]"
        print(line)
        lines.append((number, line))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
