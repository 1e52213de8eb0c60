import numpy as np
import pytest

from conecalc.discretize import DiscreteOperator, LogGrid, assemble
from conecalc.symbols import CrossSectionSpectrum, WeightData, make_cone_laplacian


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def circle_laplacian():
    """Negative cone Laplacian, circle cross-section, modes |k| <= 8."""
    return make_cone_laplacian(CrossSectionSpectrum.circle(8))


@pytest.fixture(scope="session")
def shifted_circle_target():
    """1 - Laplace on the truncated cone, modes |k| <= 2, small grid."""
    op = make_cone_laplacian(CrossSectionSpectrum.circle(2), c0=1.0)
    grid = LogGrid(0.0, 8.0, 96, "truncated_cone")
    return assemble(op, grid)


@pytest.fixture(scope="session")
def model_cone_target():
    """Frozen-coefficient Laplacian + 1 on the model cone, modes |k| <= 2."""
    op = make_cone_laplacian(CrossSectionSpectrum.circle(2), c0=1.0)
    grid = LogGrid(-5.0, 5.0, 96, "model_cone")
    target = assemble(op, grid)
    for m in target.modes:
        m.matrix = m.matrix + np.eye(grid.N)
    return target


def spd_matrix(rng, n, lo=0.5, hi=9.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(np.linspace(lo, hi, n)) @ q.T


@pytest.fixture()
def spd8(rng):
    return spd_matrix(rng, 8)


@pytest.fixture()
def diag14_target():
    return DiscreteOperator.from_matrices([np.diag([1.0, 4.0])])
