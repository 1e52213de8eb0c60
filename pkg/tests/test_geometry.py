import math

import mpmath
import numpy as np
import pytest

from conecalc.discretize import DiscreteOperator
from conecalc.calculus import dunford_powers
from conecalc.errors import ContourError
from conecalc.geometry import (
    KeyholeRegion,
    Sector,
    clenshaw_curtis,
    contour_nodes,
    in_sector,
    lambda_power,
    principal_arg,
)


def test_sector_validation():
    with pytest.raises(ValueError):
        Sector(0.0)
    with pytest.raises(ValueError):
        Sector(math.pi)
    Sector(math.pi / 2)


def test_keyhole_validation():
    with pytest.raises(ValueError):
        KeyholeRegion(-1.0, 1.0)
    with pytest.raises(ValueError):
        KeyholeRegion(0.5, 3.5)


def test_in_sector_zero_always_inside():
    assert in_sector(0.0, Sector(0.3))
    assert in_sector(0.0, Sector(3.0))


def test_in_sector_axis_cases():
    s = Sector(math.pi / 2)
    assert in_sector(-1.0, s)
    assert not in_sector(1.0, s)


def test_in_sector_oblique():
    assert in_sector(np.exp(1j * np.pi / 3), Sector(np.pi / 4))
    assert not in_sector(np.exp(1j * np.pi / 5), Sector(np.pi / 4))


def test_principal_arg_negative_axis_convention():
    assert principal_arg(-2.0) == -math.pi
    assert principal_arg(np.array([-1.0 + 0j]))[0] == -math.pi


def test_lambda_power_scalar_values():
    assert lambda_power(4.0, -0.5) == pytest.approx(0.5)
    # on the cut the argument is -pi
    assert complex(lambda_power(-1.0, 0.5)) == pytest.approx(-1j)


def test_clenshaw_curtis_exactness():
    for n in (2, 3, 8, 33, 50):
        x, w = clenshaw_curtis(n)
        assert np.all(np.diff(x) > 0)
        assert np.all(w > 0)
        assert np.sum(w) == pytest.approx(2.0, abs=1e-14)
    x, w = clenshaw_curtis(40)
    got = float(w @ np.exp(x))
    assert got == pytest.approx(math.e - math.exp(-1), abs=1e-14)


def test_arc_nodes_on_circle():
    # on the circle by construction; representable to one ulp
    q = contour_nodes(KeyholeRegion(1.0, math.pi / 2), 5.0, 16, 9, -0.5)
    arc = q.segment_nodes("C2")
    assert np.max(np.abs(np.abs(arc) - 1.0)) <= 2 * np.finfo(float).eps


def test_arc_nodes_three_point_layout():
    theta = 3 * math.pi / 4
    q = contour_nodes(KeyholeRegion(0.5, theta), 5.0, 8, 3, -0.5)
    arc = q.segment_nodes("C2")
    expect = {0.5 * np.exp(1j * theta), 0.5 + 0j, 0.5 * np.exp(-1j * theta)}
    for lam in arc:
        assert min(abs(lam - e) for e in expect) < 1e-14


def test_ray_nodes_on_rays():
    theta = 2.0
    q = contour_nodes(KeyholeRegion(0.3, theta), 12.0, 21, 8, -1.0)
    for tag, sign in (("C1", 1.0), ("C3", -1.0)):
        nodes = q.segment_nodes(tag)
        assert np.allclose(np.angle(nodes), sign * theta)
        radii = np.abs(nodes)
        assert radii.min() == pytest.approx(0.3)
        assert radii.max() == pytest.approx(0.3 * math.exp(12.0))


def test_tail_bound_closed_form():
    q = contour_nodes(KeyholeRegion(1.0, math.pi / 2), 20.0, 16, 8, -0.5)
    assert q.tail_bound == pytest.approx(2.0 * math.exp(-10.0) / 0.5, rel=1e-12)
    assert q.tail_bound == pytest.approx(1.8e-4, rel=0.02)


def test_tail_bound_decreases_with_s_max():
    bounds = [
        contour_nodes(KeyholeRegion(0.5, 2.0), s, 16, 8, -0.7).tail_bound
        for s in (5.0, 10.0, 20.0, 40.0)
    ]
    assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))
    assert all(np.isfinite(b) for b in bounds)


def test_invalid_parameters_rejected():
    region = KeyholeRegion(0.5, 2.0)
    with pytest.raises(ContourError):
        contour_nodes(region, -1.0, 16, 8, -0.5)
    with pytest.raises(ContourError):
        contour_nodes(region, 10.0, 16, 8, 0.0)
    with pytest.raises(ContourError):
        contour_nodes(region, 10.0, 16, 8, 0.3)
    with pytest.raises(ContourError):
        contour_nodes(region, 10.0, 1, 8, -0.5)


def test_node_set_conjugation_symmetric():
    q = contour_nodes(KeyholeRegion(0.5, 2.4), 15.0, 30, 17, -0.5)
    lams = q.lambdas
    for lam in lams:
        gap = np.min(np.abs(lams - np.conj(lam)))
        assert gap <= 1e-15 * max(1.0, abs(lam))


def test_arc_weights_sum_to_arc_length():
    for theta in (0.5, math.pi / 2, 3 * math.pi / 4):
        for n_arc in (3, 8, 41):
            q = contour_nodes(KeyholeRegion(0.5, theta), 10.0, 8, n_arc, -0.5)
            total = float(np.sum(np.abs(q.segment_weights("C2"))))
            assert total == pytest.approx(2 * 0.5 * theta, abs=1e-12)


def test_real_power_of_real_operator_is_real():
    target = DiscreteOperator.from_matrices([np.diag([1.0, 3.0, 7.0])])
    powers, _ = dunford_powers(target, [-0.5], theta=3 * math.pi / 4)
    P = powers[-0.5][0]
    assert np.max(np.abs(P.imag)) < 1e-10


@pytest.mark.parametrize("a", [1.0, 2.0, 10.0])
@pytest.mark.parametrize("z", [-1.0, -0.5, -0.1 + 3j, -0.1 - 3j])
def test_refinement_monotonicity_scalar(a, z):
    """Doubling node counts never increases the error against a**z."""
    target = DiscreteOperator.from_matrices([np.array([[a]])])
    exact = complex(lambda_power(a, z))
    errs = []
    for n in (100, 200, 400):
        contour = contour_nodes(
            KeyholeRegion(0.5, 3 * math.pi / 4), 30.0, n, max(8, n // 5), -1.0
        )
        powers, _ = dunford_powers(target, [z], contour=contour)
        errs.append(abs(complex(powers[complex(z)][0][0, 0]) - exact) / abs(exact))
    # allowance for the round-off plateau once the quadrature has converged
    for e1, e2 in zip(errs, errs[1:]):
        assert e2 <= e1 * (1 + 1e-6) + 1e-10


@pytest.mark.parametrize("theta", [math.pi / 2, 3 * math.pi / 4])
@pytest.mark.parametrize("z", [-1.0, -0.5])
def test_tail_bound_is_true_upper_bound(theta, z):
    """High-precision omitted scalar tail (a = 1) stays below tail_bound."""
    delta, s_max = 0.5, 6.0
    q = contour_nodes(KeyholeRegion(delta, theta), s_max, 16, 8, z)

    def ray(sign):
        f = lambda s: (
            mpmath.e ** (mpmath.mpc(0, sign * theta) * (z + 1))
            * (delta * mpmath.e**s) ** (z + 1)
            / (delta * mpmath.e ** (s + 1j * sign * theta) - 1.0)
        )
        return mpmath.quad(f, [s_max, s_max + 60])

    tail = abs(ray(-1) - ray(+1))
    assert tail <= q.tail_bound * (1 + 1e-12)
