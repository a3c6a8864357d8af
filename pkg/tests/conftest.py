import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from blab.approx import build_family, build_stack  # noqa: E402
from blab.space import SpaceParams, build_quadrature  # noqa: E402
from blab.symbols import test_symbol_library  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def lib():
    return test_symbol_library()


class Setup:
    def __init__(self, alpha, n):
        self.params = SpaceParams(alpha, n, 2 * n, n)
        self.quad = build_quadrature(self.params)


_setups = {}


def setup_for(alpha: float, n: int) -> Setup:
    key = (alpha, n)
    if key not in _setups:
        _setups[key] = Setup(alpha, n)
    return _setups[key]


_stacks = {}


def sector_stack(n: int, m: int = 6):
    """Mollified-truncation family and Hankel stack for the sector symbol, cached per session."""
    key = (n, m)
    if key not in _stacks:
        f = test_symbol_library()["sector"]
        s = setup_for(0.0, n)
        fam = build_family(f, m)
        _stacks[key] = (f, fam, build_stack(f, fam, s.params, s.quad), s)
    return _stacks[key]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
