import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qlab import dirichlet as dr  # noqa: E402
from qlab.domains import Tag, cylinder, quarter_ball  # noqa: E402
from qlab.frequency import homogeneous_2d_solution  # noqa: E402


def quarter_problem(h: float, data=None):
    """Quarter-disk problem: zero on both walls, the 2-homogeneous pair on the arc."""
    mesh = quarter_ball(2, 1.0, h)
    exact = homogeneous_2d_solution(2, [[1.0, 0.0], [-1.0, 0.0]]) if data is None else data
    zero = dr.Trace.zero(2, 2)
    f0 = dr.dirichlet_problem(mesh, 2, 2, [((Tag.V0, Tag.V1), zero), ((Tag.LATERAL,), dr.Trace.custom(exact, 2, 2))])
    return mesh, f0, exact


def cylinder_problem(h: float):
    mesh = cylinder(h)
    f0 = dr.dirichlet_problem(mesh, 2, 2, [((Tag.BOTTOM,), dr.Trace.zero(2, 2)),
                                           ((Tag.LATERAL, Tag.TOP), dr.Trace(dr.TraceKind.SQRT_CYLINDER))])
    return mesh, f0


@pytest.fixture(scope="session")
def quarter_solution():
    """Converged quarter-disk minimizer at h = 1/64 (criterion-2 run)."""
    mesh, f0, exact = quarter_problem(1 / 64)
    f, report = dr.minimize(f0, tol=1e-10)
    return mesh, f0, f, report, exact


@pytest.fixture(scope="session")
def cylinder_solution():
    mesh, f0 = cylinder_problem(1 / 12)
    u, report = dr.minimize(f0, tol=1e-10)
    return mesh, f0, u, report


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
