import numpy as np
import pytest

from kirchplate import BoundaryOperators, FeSpace, build_square_mesh, classify_boundary

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def setup_ops():
    """BoundaryOperators for the default layout, cached by (level, degree, tags)."""
    cache = {}

    def get(level, degree, tags=None):
        key = (level, degree, None if tags is None else tuple(sorted(tags.items())))
        if key not in cache:
            mesh = build_square_mesh(level)
            part = classify_boundary(mesh, tags)
            cache[key] = BoundaryOperators(FeSpace(mesh, degree), part)
        return cache[key]

    return get
