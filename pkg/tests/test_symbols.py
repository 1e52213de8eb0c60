import math

import numpy as np
import pytest

from conecalc.errors import StripBoundaryError, SymbolError
from conecalc.geometry import Sector
from conecalc.symbols import (
    CrossSectionSpectrum,
    FuchsOperator,
    WeightData,
    all_indicial_roots,
    check_ellipticity,
    check_pq_condition,
    conormal_polynomial,
    conormal_symbol,
    domain_gap_dimension,
    gap_strip,
    indicial_roots,
    make_cone_laplacian,
    singular_functions,
    symbol_eval,
    weight_line_invertible,
)


def closed_form_roots(n, nu):
    disc = (n - 1) ** 2 / 4.0 - nu
    return {(n - 1) / 2.0 + math.sqrt(disc), (n - 1) / 2.0 - math.sqrt(disc)}


def custom_operator(coeff, n=1, eigenvalues=((0.0, 1),), gamma=0.0, p=2.0, mu=None):
    mu = len(coeff) - 1 if mu is None else mu
    return FuchsOperator(
        mu=mu,
        weight=WeightData(gamma=gamma, p=p, n=n),
        cross_section=CrossSectionSpectrum.from_table(n, eigenvalues),
        coeff=tuple(coeff),
        symbol=None,
    )


class TestCrossSectionSpectrum:
    def test_circle(self):
        spec = CrossSectionSpectrum.circle(3)
        assert spec.n == 1
        assert spec.eigenvalues == ((0.0, 1), (-1.0, 2), (-4.0, 2), (-9.0, 2))

    def test_validation(self):
        with pytest.raises(ValueError):
            CrossSectionSpectrum.from_table(1, [(-1.0, 1)])  # missing 0
        with pytest.raises(ValueError):
            CrossSectionSpectrum.from_table(1, [(0.0, 1), (1.0, 1)])
        with pytest.raises(ValueError):
            CrossSectionSpectrum.from_table(1, [(0.0, 1), (-4.0, 1), (-1.0, 1)])


class TestWeightData:
    def test_gamma_p(self):
        assert WeightData(0.0, 2.0, 1).gamma_p == 0.0
        assert WeightData(0.0, 4.0, 3).gamma_p == pytest.approx(1.0)
        assert WeightData.lp_identification(4, 2.0).gamma == 0.0

    def test_p_range(self):
        with pytest.raises(ValueError):
            WeightData(0.0, 1.0, 1)


class TestConormalSymbol:
    def test_circle_mode_polynomials(self, circle_laplacian):
        # mode with eigenvalue -k*k has conormal polynomial -z**2 + k**2
        for k in range(0, 9):
            c = conormal_polynomial(circle_laplacian, k)
            assert np.allclose(c, [k * k, 0.0, -1.0])

    def test_circle_value(self, circle_laplacian):
        assert conormal_symbol(circle_laplacian, 2, 1.0) == pytest.approx(3.0)

    def test_dim4_zero_mode(self):
        op = make_cone_laplacian(CrossSectionSpectrum.from_table(4, [(0.0, 1)]))
        assert np.allclose(conormal_polynomial(op, 0), [0.0, 3.0, -1.0])
        assert conormal_symbol(op, 0, 3.0) == pytest.approx(0.0)
        assert conormal_symbol(op, 0, 0.0) == pytest.approx(0.0)

    def test_constants_are_harmonic(self):
        for n in (1, 2, 5):
            op = make_cone_laplacian(CrossSectionSpectrum.from_table(n, [(0.0, 1)]))
            assert conormal_symbol(op, 0, 0.0) == 0.0

    def test_shift_invisible_at_tip(self):
        spec = CrossSectionSpectrum.circle(2)
        assert np.allclose(
            conormal_polynomial(make_cone_laplacian(spec, c0=3.0), 1),
            conormal_polynomial(make_cone_laplacian(spec, c0=0.0), 1),
        )


class TestIndicialRoots:
    def test_circle_strip(self, circle_laplacian):
        roots = indicial_roots(circle_laplacian, (-2.5, 2.5))
        got = sorted((r.mode_index, round(r.z.real, 9), r.order) for r in roots)
        assert got == [
            (0, 0.0, 2),
            (1, -1.0, 1),
            (1, 1.0, 1),
            (2, -2.0, 1),
            (2, 2.0, 1),
        ]

    def test_dim4_strip(self):
        spec = CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1)])
        op = make_cone_laplacian(spec)
        roots = indicial_roots(op, (0.5, 4.5))
        got = sorted((r.mode_index, round(r.z.real, 9)) for r in roots)
        assert got == [(0, 3.0), (1, 4.0)]

    def test_interior_strip_empty(self):
        spec = CrossSectionSpectrum.from_table(5, [(0.0, 1), (-2.0, 2), (-7.0, 1)])
        op = make_cone_laplacian(spec)
        assert indicial_roots(op, (0.5, 3.5)) == []

    def test_closed_form_equivalence(self, circle_laplacian):
        for r in all_indicial_roots(circle_laplacian):
            want = closed_form_roots(1, r.nu)
            assert min(abs(r.z - w) for w in want) < 1e-10
            assert abs(r.z.imag) < 1e-10

    def test_conjugate_symmetry_complex_roots(self):
        op = custom_operator([np.array([[1.0]]), np.array([[0.0]]), np.array([[1.0]])])
        roots = [r.z for r in all_indicial_roots(op)]
        assert sorted((z.real, z.imag) for z in roots) == [(0.0, -1.0), (0.0, 1.0)]

    def test_degenerate_polynomial_rejected(self):
        op = custom_operator([np.array([[0.0]]), np.array([[0.0]])])
        with pytest.raises(SymbolError):
            all_indicial_roots(op)

    def test_strip_validation(self, circle_laplacian):
        with pytest.raises(ValueError):
            indicial_roots(circle_laplacian, (2.0, 1.0))
        with pytest.raises(ValueError):
            indicial_roots(circle_laplacian, (-math.inf, 1.0))


class TestWeightLine:
    def test_dim4_margin(self):
        spec = CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1)])
        op = make_cone_laplacian(spec)
        check = weight_line_invertible(op, 0.0)
        assert check.invertible
        assert check.line == pytest.approx(0.5)
        assert check.margin == pytest.approx(0.5)

    def test_root_on_line(self, circle_laplacian):
        check = weight_line_invertible(circle_laplacian, -1.0)
        assert check.line == pytest.approx(0.0)
        assert not check.invertible
        assert check.margin == pytest.approx(0.0, abs=1e-12)

    def test_trivial_operator_infinite_margin(self):
        op = custom_operator([np.array([[1.0]]), np.array([[0.0]])])
        check = weight_line_invertible(op, 0.0)
        assert check.invertible
        assert check.margin == math.inf


class TestSymbolEval:
    def test_rescaled_is_squared_modulus(self, circle_laplacian):
        for tau, nh in [(1.0, 0.0), (0.3, 0.4), (-2.0, 1.0)]:
            val = symbol_eval(circle_laplacian, "rescaled", 0.0, tau, nh)
            assert val == pytest.approx(tau * tau + nh * nh)

    def test_principal_at_unit_point(self, circle_laplacian):
        assert symbol_eval(circle_laplacian, "principal", 1.0, 1.0, 0.0) == pytest.approx(1.0)

    def test_homogeneity(self, circle_laplacian):
        base = symbol_eval(circle_laplacian, "rescaled", 0.0, 0.7, 0.2)
        scaled = symbol_eval(circle_laplacian, "rescaled", 0.0, 1.4, 0.4)
        assert scaled == pytest.approx(4.0 * base)

    def test_rescaled_is_tip_limit_of_principal(self, circle_laplacian):
        tau, nh, t = 0.83, 0.41, 0.2
        principal = symbol_eval(circle_laplacian, "principal", t, tau / t, nh)
        rescaled = symbol_eval(circle_laplacian, "rescaled", 0.0, tau, nh)
        assert t**2 * principal == pytest.approx(rescaled, rel=1e-14)

    def test_zero_covector_rejected(self, circle_laplacian):
        with pytest.raises(ValueError):
            symbol_eval(circle_laplacian, "rescaled", 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            symbol_eval(circle_laplacian, "principal", 0.0, 1.0, 0.0)


class TestEllipticity:
    def test_laplacian_symbols_clear_left_half_plane(self, circle_laplacian):
        rep = check_ellipticity(circle_laplacian, Sector(math.pi / 2), scan_resolution=16)
        assert rep.symbol_condition
        assert rep.model_cone_condition

    def test_sign_flip_fails_at_tau_one(self):
        spec = CrossSectionSpectrum.circle(1)
        flipped = custom_operator(
            [np.array([[0.0, 1.0]]), np.array([[0.0]]), np.array([[1.0]])],
            eigenvalues=spec.eigenvalues,
        )
        rep = check_ellipticity(flipped, Sector(math.pi / 2), scan_resolution=16)
        assert not rep.symbol_condition
        kind, _t, tau, nu_hat, value = rep.symbol_violation
        assert kind == "rescaled"
        assert (tau, nu_hat) == (1.0, 0.0)
        assert value == pytest.approx(-1.0)

    def test_shifted_operator(self, shifted_circle_target):
        from conecalc.calculus import spectrum

        op = shifted_circle_target.source
        rep = check_ellipticity(op, Sector(3 * math.pi / 4), scan_resolution=16)
        assert rep.symbol_condition
        assert rep.model_cone_condition
        eigs = spectrum(shifted_circle_target)
        assert float(np.min(eigs.real)) >= 1.0 - 1e-8
        assert float(np.max(np.abs(eigs.imag))) < 1e-8

    def test_scan_resolution_validated(self, circle_laplacian):
        with pytest.raises(ValueError):
            check_ellipticity(circle_laplacian, Sector(2.0), scan_resolution=4)


class TestDomainGap:
    def test_circle_gap_is_two(self, circle_laplacian):
        assert gap_strip(circle_laplacian, 0.0) == (-1.0, 1.0)
        assert domain_gap_dimension(circle_laplacian, 0.0) == 2

    def test_dim4_gap_is_zero(self):
        spec = CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1), (-8.0, 2)])
        op = make_cone_laplacian(spec)
        assert domain_gap_dimension(op, 0.0) == 0

    def test_trivial_symbol_gap_zero(self):
        op = custom_operator([np.array([[1.0]]), np.array([[0.0]])])
        assert domain_gap_dimension(op, 0.0) == 0

    def test_strict_boundary_raises_for_circle(self, circle_laplacian):
        with pytest.raises(StripBoundaryError):
            domain_gap_dimension(circle_laplacian, 0.0, strict_boundary=True)

    def test_mode_cutoff_invariance(self):
        dims = [
            domain_gap_dimension(make_cone_laplacian(CrossSectionSpectrum.circle(k)))
            for k in (3, 6, 12)
        ]
        assert dims == [2, 2, 2]

    def test_multiplicity_weighting(self):
        # simple root at z = 1/2 inside the strip (-1, 1), multiplicity 3
        spec = ((0.0, 1),)
        op = custom_operator(
            [np.array([[-0.5]]), np.array([[1.0]]), np.array([[0.0]])],
            eigenvalues=((0.0, 3),),
        )
        assert domain_gap_dimension(op, 0.0) == 3


class TestSingularFunctions:
    def test_circle_log_pair(self, circle_laplacian):
        funcs = singular_functions(circle_laplacian, 0.0)
        assert len(funcs) == 2
        assert {f.log_power for f in funcs} == {0, 1}
        assert all(f.exponent == 0 for f in funcs)
        assert all(f.mode_index == 0 for f in funcs)
        rendered = sorted(f.render() for f in funcs)
        assert rendered == ["omega(t)", "omega(t) * log(t)**1"]

    def test_dim4_empty(self):
        spec = CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1)])
        assert singular_functions(make_cone_laplacian(spec), 0.0) == []

    def test_simple_root_single_function(self):
        op = custom_operator(
            [np.array([[-0.5]]), np.array([[1.0]]), np.array([[0.0]])]
        )
        funcs = singular_functions(op, 0.0)
        assert len(funcs) == 1
        assert funcs[0].exponent == pytest.approx(0.5)
        assert funcs[0].log_power == 0

    def test_exponent_real_parts_in_strip(self, circle_laplacian):
        lo, hi = gap_strip(circle_laplacian, 0.0)
        for f in singular_functions(circle_laplacian, 0.0):
            assert lo < f.exponent.real < hi


class TestPqCondition:
    def test_reference_cases(self):
        assert check_pq_condition(4, 2.0) is True
        assert check_pq_condition(3, 2.0) is False
        assert check_pq_condition(10, 3.0) is True

    def test_validation(self):
        with pytest.raises(ValueError):
            check_pq_condition(4, 1.0)
