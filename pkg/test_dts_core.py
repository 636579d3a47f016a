#!/usr/bin/env python3
"""
Test discrete trigonometric systems: exact values, Gram entries, Fourier
coefficients against quadrature, truncation and polynomial helpers
"""

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from engines.dts_core import (
    DiscreteTrigSystem,
    FrequencySet,
    RootOfUnity,
    TrigPolynomial,
    central_window,
    decay_constant,
    dts_eval,
    dts_eval_multi,
    dts_fourier_coeff,
    dts_gram_exact,
    dts_spectrum,
    dts_table,
    dts_truncate,
    dts_value_exact,
    lemma_constant,
    parseval_deficit,
    poly_eval,
    poly_inner,
    poly_l2_norm,
    progression_coefficients,
    truncation_error_sq,
)
from utils.errors import DomainError


def _cell_integrals(l: int, m: int) -> np.ndarray:
    """Quadrature of exp(-2 pi i m x) over each cell [k/l, (k+1)/l)"""
    out = np.zeros(l, dtype=complex)
    for k in range(l):
        a, b = k / l, (k + 1) / l
        re, _ = quad(lambda x: math.cos(2 * math.pi * m * x), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        im, _ = quad(lambda x: -math.sin(2 * math.pi * m * x), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        out[k] = complex(re, im)
    return out


class TestEvaluation:

    def test_order_two_values(self):
        assert dts_value_exact(2, 1, 0.25) == RootOfUnity(0, 1)
        assert dts_value_exact(2, 1, 0.75) == RootOfUnity(1, 2)
        assert dts_eval(2, 1, 0.75) == pytest.approx(-1)

    def test_points_reduce_mod_one(self):
        assert dts_value_exact(3, 1, 1.5) == dts_value_exact(3, 1, 0.5)
        assert dts_value_exact(3, 2, -0.25) == dts_value_exact(3, 2, 0.75)

    def test_exact_fraction_points_sit_in_the_right_cell(self):
        assert dts_value_exact(3, 1, Fraction(1, 3)) == RootOfUnity(1, 3)
        assert dts_value_exact(3, 1, Fraction(1, 3) - Fraction(1, 10 ** 9)) == RootOfUnity(0, 1)

    def test_multi_value_on_cell(self):
        system = DiscreteTrigSystem((2, 3))
        assert system.value_at_cell((1, 1), (1, 1)) == RootOfUnity(5, 6)
        assert dts_eval_multi((2, 3), (1, 1), (0.6, 0.4)) == pytest.approx(cmath.exp(2j * math.pi * 5 / 6))

    def test_index_and_order_checks(self):
        with pytest.raises(DomainError):
            dts_eval(4, 4, 0.1)
        with pytest.raises(DomainError):
            dts_eval(0, 0, 0.1)
        with pytest.raises(DomainError):
            DiscreteTrigSystem((2, 1))
        with pytest.raises(DomainError):
            dts_eval_multi((2, 3), (1,), (0.1, 0.2))

    def test_table_lists_exact_roots(self):
        table = dts_table(3)
        assert [row['n'] for row in table] == [0, 1, 2]
        assert table[1]['values'] == [{'num': 0, 'mod': 1}, {'num': 1, 'mod': 3}, {'num': 2, 'mod': 3}]

    def test_root_arithmetic(self):
        assert RootOfUnity(2, 4) == RootOfUnity(1, 2)
        assert RootOfUnity(1, 3) * RootOfUnity(1, 6) == RootOfUnity(1, 2)
        assert RootOfUnity(1, 5).conjugate() == RootOfUnity(4, 5)


class TestOrthonormality:

    @pytest.mark.parametrize("l", range(1, 13))
    def test_gram_is_identity(self, l):
        for n in range(l):
            for n2 in range(l):
                assert dts_gram_exact(l, n, n2) == Fraction(int(n == n2))

    def test_multiple_system_gram(self):
        system = DiscreteTrigSystem((2, 3))
        assert system.gram((1, 2), (1, 2)) == 1
        assert system.gram((1, 2), (0, 2)) == 0


class TestFourierCoefficients:

    @pytest.mark.parametrize("l", [2, 3, 4, 8, 16])
    def test_closed_form_matches_quadrature(self, l):
        roots = np.exp(2j * np.pi * np.arange(l) / l)
        for m in range(-5 * l, 5 * l + 1):
            cells = _cell_integrals(l, m)
            for n in range(l):
                expected = complex(np.sum(roots ** n * cells))
                assert abs(dts_fourier_coeff(l, n, m) - expected) < 1e-10

    def test_off_progression_coefficients_are_zero(self):
        for m in range(-20, 21):
            if (m - 2) % 5:
                assert dts_fourier_coeff(5, 2, m) == 0j

    def test_spot_value(self):
        assert abs(dts_fourier_coeff(2, 1, 1) - (-2j / math.pi)) < 1e-10

    def test_progression_coefficients_agree(self):
        js = np.arange(-6, 7)
        expected = [dts_fourier_coeff(7, 3, 3 + 7 * int(j)) for j in js]
        assert np.allclose(progression_coefficients(7, 3, js), expected, atol=1e-14)

    def test_decay_constant(self):
        assert decay_constant(range(2, 40), 50) <= 2

    def test_spectrum(self):
        assert list(dts_spectrum(5, 2, 1)) == [-3, 2, 7]
        assert 12 in dts_spectrum(5, 2, 2)
        assert 3 not in dts_spectrum(5, 2, 2)


class TestTruncation:

    def test_central_window(self):
        assert central_window(1) == (0, 0)
        assert central_window(2) == (-1, 0)
        assert central_window(4) == (-2, 1)
        with pytest.raises(DomainError):
            central_window(0)

    def test_order_two_budget_two(self):
        poly = dts_truncate(2, 1, 2)
        assert sorted(poly.terms) == [-1, 1]
        assert poly.terms[-1] == pytest.approx(2j / math.pi)
        assert poly.terms[1] == pytest.approx(-2j / math.pi)

    def test_error_is_the_parseval_deficit(self):
        for l, n, T in [(7, 3, 5), (16, 1, 16), (97, 60, 64)]:
            kept = dts_truncate(l, n, T)
            assert truncation_error_sq(l, n, T) == pytest.approx(1 - kept.l2_norm_sq(), abs=1e-12)

    def test_constant_function_truncates_exactly(self):
        assert truncation_error_sq(5, 0, 1) == 0
        assert dts_truncate(5, 0, 8).terms == {0: 1 + 0j}

    def test_truncated_norm_at_most_one(self):
        for l in (4, 16, 64):
            for n in range(l):
                assert dts_truncate(l, n, l).l2_norm() <= 1 + 1e-12

    def test_lemma_constant_is_bounded(self):
        assert lemma_constant([2 ** j for j in range(2, 11)]) < 0.5

    def test_deficit_halves_when_the_window_doubles(self):
        for l, n in [(17, 5), (64, 1), (101, 77)]:
            ratio = parseval_deficit(l, n, 200) / parseval_deficit(l, n, 100)
            assert 0.35 <= ratio <= 0.65

    def test_deficit_vanishes(self):
        assert parseval_deficit(5, 2, 1000) < 1e-3


class TestPolynomials:

    def test_grid_values_match_direct_evaluation(self):
        poly = TrigPolynomial(1, {3: 1, -2: 0.5j, 17: -0.25})
        values = poly.grid_values(16)
        for i in range(16):
            assert abs(values[i] - poly.evaluate(i / 16)) < 1e-12

    def test_two_dimensional_grid_values(self):
        poly = TrigPolynomial(2, {(1, -1): 1, (0, 2): 0.5})
        values = poly.grid_values(8).reshape(8, 8)
        assert abs(values[3, 5] - poly.evaluate((3 / 8, 5 / 8))) < 1e-12

    def test_modulation_preserves_norm(self):
        poly = dts_truncate(8, 3, 8)
        shifted = poly.modulated(100)
        assert shifted.l2_norm_sq() == poly.l2_norm_sq()
        assert sorted(shifted.terms) == sorted(f + 100 for f in poly.terms)

    def test_disjoint_spectra_are_orthogonal(self):
        f = TrigPolynomial(1, {1: 1, 2: 1})
        g = TrigPolynomial(1, {3: 1})
        assert f.spectrum().isdisjoint(g.spectrum())
        assert f.inner(g) == 0
        assert (f + g).l2_norm_sq() == pytest.approx(3)

    def test_serialization(self):
        poly = TrigPolynomial(2, {(1, 2): 1 - 1j, (0, -3): 0.5})
        assert TrigPolynomial.from_json(poly.to_json()) == poly

    def test_duplicate_frequency_rejected(self):
        data = {'dim': 1, 'terms': [{'freq': [2], 're': 1, 'im': 0}, {'freq': [2], 're': 0, 'im': 1}]}
        with pytest.raises(DomainError):
            TrigPolynomial.from_json(data)

    def test_frequency_set_shift(self):
        s = FrequencySet.of(2, [(0, 1), (2, 2)])
        assert (3, 3) in s.shifted((1, 1))
        assert len(s.union(FrequencySet.of(2, [(0, 1)]))) == 2

    def test_evaluation_norm_and_inner_product(self):
        f = TrigPolynomial(1, {1: 1, -1: 1j})
        g = TrigPolynomial(1, {1: 2})
        assert poly_eval(f, 0.25) == pytest.approx(1j + 1j * -1j)
        assert poly_l2_norm(f) == pytest.approx(math.sqrt(2))
        assert poly_inner(f, g) == pytest.approx(2)
        assert poly_inner(f, f) == pytest.approx(poly_l2_norm(f) ** 2)
