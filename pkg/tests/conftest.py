from __future__ import annotations

import pytest

from hexmpo.lattice import build_eagle_127, build_single_hexagon_12, build_two_hexagon_21

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def eagle():
    return build_eagle_127()


@pytest.fixture(scope="session")
def twohex():
    return build_two_hexagon_21()


@pytest.fixture(scope="session")
def hex12():
    return build_single_hexagon_12()


@pytest.fixture(scope="session")
def theta10():
    """Two loops sharing sites 0 and 3, with a scrambled 1D order; sites 0 and 3 have degree 3."""
    from hexmpo.lattice import Lattice

    ring = [(k, (k + 1) % 6) for k in range(6)]
    arm = [(0, 6), (6, 7), (7, 8), (8, 9), (9, 3)]
    return Lattice("theta10", 10, tuple(ring + arm), snake=(5, 0, 6, 7, 1, 2, 8, 3, 9, 4))
