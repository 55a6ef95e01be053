import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from highway_mapf.grid_map import assign_highway, generate_warehouse  # noqa: E402

# one line per acceptance criterion, filled in by test_acceptance.py
CRITERIA: dict[str, tuple[bool, str]] = {}


def record(key: str, ok: bool, detail: str) -> None:
    prev = CRITERIA.get(key)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    CRITERIA[key] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        num = "".join(ch for ch in key if ch.isdigit())
        return (int(num or 0), key)

    for key in sorted(CRITERIA, key=order):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def w3():
    grid = generate_warehouse(3)
    return grid, assign_highway(grid)
