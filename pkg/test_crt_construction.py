#!/usr/bin/env python3
"""
Test Chinese remaindering, the twisted cell bijection and the exact
correspondence between multiple and one-dimensional DTS
"""

import itertools
import time

import numpy as np
import pytest

from engines.crt_construction import (
    CoprimeModuli,
    build_theta,
    coprime_tuples,
    crt,
    crt_tau,
    crt_tau_bar,
    crt_tau_search,
    dts_correspondence,
    is_bijection,
    is_prime,
    next_prime,
    primes_from,
    tau_bar_table,
    tau_table,
    verify_equivalence,
)
from engines.dts_core import DiscreteTrigSystem
from engines.mp_equiv import StepFunction, mp_apply
from utils.errors import DomainError

PROPOSITION_MODULI = [(2, 3), (3, 5), (2, 3, 5), (3, 5, 7)]


def _primes_up_to(limit):
    return list(itertools.takewhile(lambda p: p <= limit, primes_from(2)))


class TestPrimes:

    def test_primality(self):
        assert [p for p in range(30) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
        assert is_prime(2 ** 61 - 1)
        assert not is_prime(561)

    def test_next_prime(self):
        assert next_prime(14) == 17
        assert next_prime(13) == 13
        assert next_prime(-5) == 2


class TestChineseRemainder:

    def test_crt(self):
        assert crt([2, 3], [3, 5]) == (8, 15)
        with pytest.raises(DomainError):
            crt([1, 1], [4, 6])

    def test_moduli_validation(self):
        with pytest.raises(DomainError):
            CoprimeModuli((4, 6))
        with pytest.raises(DomainError):
            CoprimeModuli((1, 5))
        with pytest.raises(DomainError):
            CoprimeModuli.parse('3,x')
        assert CoprimeModuli.parse('3,5,7').moduli == (3, 5, 7)

    def test_tau_and_tau_bar(self):
        moduli = CoprimeModuli((3, 5))
        assert moduli.twist == 8
        assert crt_tau(moduli, (1, 2)) == 7
        assert crt_tau_bar(moduli, (1, 0)) == 5
        with pytest.raises(DomainError):
            crt_tau(moduli, (3, 0))

    def test_tau_matches_search(self):
        moduli = CoprimeModuli((3, 5, 7))
        table = tau_table(moduli)
        for row, n_vec in enumerate(itertools.product(range(3), range(5), range(7))):
            assert crt_tau(moduli, n_vec) == crt_tau_search(moduli, n_vec) == table[row]

    def test_bijectivity_sweep(self):
        start = time.perf_counter()
        tuples = list(coprime_tuples(_primes_up_to(31), 1000))
        assert tuples
        for moduli in tuples:
            p = moduli.product
            assert is_bijection(tau_table(moduli), p), moduli
            assert is_bijection(tau_bar_table(moduli), p), moduli
        assert time.perf_counter() - start < 5

    def test_coprime_tuples(self):
        tuples = [m.moduli for m in coprime_tuples([2, 3, 5, 7], 30)]
        assert tuples == [(2, 3), (2, 5), (2, 7), (3, 5), (3, 7), (2, 3, 5)]

    def test_four_prime_tuples_are_swept(self):
        tuples = [m.moduli for m in coprime_tuples([2, 3, 5, 7, 11], 2310)]
        assert (2, 3, 5, 7) in tuples
        assert (2, 3, 5, 11) in tuples
        assert (2, 3, 5, 7, 11) not in tuples

    def test_worked_examples(self):
        assert crt_tau(CoprimeModuli((2, 3, 5)), (1, 2, 0)) == 5
        assert crt_tau_bar(CoprimeModuli((3, 5)), (2, 3)) == 4
        assert crt_tau_bar(CoprimeModuli((3, 5)), (1, 1)) == 8
        assert build_theta(CoprimeModuli((2, 3))).mapping[1 * 3 + 2] == 1


class TestCorrespondence:

    def test_spot_indices(self):
        assert dts_correspondence(CoprimeModuli((2, 3)), (0, 0)) == 0
        assert dts_correspondence(CoprimeModuli((2, 3)), (1, 1)) == 1
        assert dts_correspondence(CoprimeModuli((3, 5)), (2, 3)) == 8

    def test_sampled_cells_for_large_products(self):
        moduli = CoprimeModuli((211, 223))
        assert dts_correspondence(moduli, (5, 7), seed=1) == crt_tau(moduli, (5, 7))

    @pytest.mark.parametrize("moduli", PROPOSITION_MODULI)
    def test_exhaustive_verification(self, moduli):
        report = verify_equivalence(CoprimeModuli(moduli))
        assert report.passed
        assert report.congruence_failures == 0
        assert report.tau_bijective and report.tau_bar_bijective
        assert report.prob_equiv is True
        assert report.cells_checked == report.indices_checked == int(np.prod(moduli))
        assert report.eps_equiv is True
        assert report.witness_distance == 0

    def test_every_tuple_up_to_210_is_equivalent(self):
        tuples = list(coprime_tuples(_primes_up_to(31), 210))
        assert (2, 3, 5, 7) in [m.moduli for m in tuples]
        for moduli in tuples:
            report = verify_equivalence(moduli)
            assert report.passed, moduli.moduli
            assert report.prob_equiv is True, moduli.moduli

    def test_theta_is_tau_bar_in_row_major_order(self):
        moduli = CoprimeModuli((3, 5))
        theta = build_theta(moduli)
        assert list(theta.mapping) == tau_bar_table(moduli).tolist()
        assert theta.is_bijective

    def test_theta_carries_every_function(self):
        moduli = CoprimeModuli((3, 5))
        multi = DiscreteTrigSystem(moduli.moduli)
        single = DiscreteTrigSystem((moduli.product,))
        theta = build_theta(moduli)
        for n_vec in multi.indices():
            image = mp_apply(theta, StepFunction.from_dts(multi, n_vec))
            assert image == StepFunction.from_dts(single, (crt_tau(moduli, n_vec),))

    def test_report_serialization(self):
        data = verify_equivalence(CoprimeModuli((2, 3))).to_json()
        assert data['passed'] is True
        assert data['eps_equiv'] is True
        assert data['witness_distance'] == 0
        assert data['moduli'] == [2, 3]
        assert data['failures'] == []
