import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tetralfa import assemble_stencil, basis_from_tet, coarse_stencil, shape_catalog  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def regular():
    basis = basis_from_tet(shape_catalog("regular"))
    return basis, assemble_stencil(basis), coarse_stencil(basis)


@pytest.fixture(scope="session")
def stencils():
    cache = {}

    def get(name):
        if name not in cache:
            basis = basis_from_tet(shape_catalog(name))
            cache[name] = (basis, assemble_stencil(basis), coarse_stencil(basis))
        return cache[name]
    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
