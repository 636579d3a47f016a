#!/usr/bin/env python3
"""
Test the reduction pipeline: moduli choice, discretization, slot
polynomials, shifts, plan structure, coefficient transfer and certificates
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from config import Config
from engines.crt_construction import CoprimeModuli
from engines.dts_core import TrigPolynomial
from engines.reduction import (
    RC,
    SRC,
    MultiIndexSequence,
    ReductionPlan,
    assign_shifts,
    audit_plan,
    block_equivalence_certificate,
    build_block_polys,
    build_reduction,
    certify_block,
    choose_block_moduli,
    discretization_distance,
    discretize_block,
    map_coefficients,
    plan_block,
    random_multi_indices,
    random_src_polynomials,
    series_identity_gap,
    sup_error,
    verify_weight_transfer,
)
from engines.weights import WeightSequence
from utils.errors import DomainError, PreconditionError


class TestInputs:

    def test_rc_entries_must_be_distinct(self):
        with pytest.raises(DomainError):
            MultiIndexSequence(2, RC, [(1, 2), (1, 2)])
        with pytest.raises(DomainError):
            MultiIndexSequence(2, RC, [(1, 2, 3)])

    def test_src_spectra_must_be_disjoint(self):
        a = TrigPolynomial(1, {1: 1, 2: 1})
        b = TrigPolynomial(1, {2: 1, 5: 1})
        with pytest.raises(DomainError):
            MultiIndexSequence(1, SRC, [a, b])

    def test_src_polynomials_are_normalized(self):
        sequence = MultiIndexSequence(1, SRC, [TrigPolynomial(1, {1: 3, 4: 4})])
        assert sequence.entries[0].l2_norm() == pytest.approx(1)

    def test_random_indices_are_seeded(self):
        a = random_multi_indices(20, 2, 3, seed=11)
        b = random_multi_indices(20, 2, 3, seed=11)
        assert a.entries == b.entries
        assert len(set(a.entries)) == 20
        assert all(max(abs(c) for c in v) <= 3 for v in a.entries)
        with pytest.raises(DomainError):
            random_multi_indices(10, 1, 1, seed=0)

    def test_bare_lists_read_as_rc(self):
        sequence = MultiIndexSequence.from_json([[1, 0], [0, 1]])
        assert sequence.mode == RC and sequence.dim == 2
        assert sequence.to_json() == {'dim': 2, 'mode': RC, 'indices': [[1, 0], [0, 1]]}


class TestDiscretization:

    def test_moduli_choice(self):
        assert choose_block_moduli([(1, 2)], 0.2).moduli == (97, 101)
        assert choose_block_moduli([(1,)], 0.1).moduli == (67,)
        assert choose_block_moduli([(1,)], 0.5).moduli == (13,)
        assert choose_block_moduli([(0,)], 0.5).moduli == (2,)

    def test_moduli_meet_the_target(self):
        block = [(3, -4), (-2, 1), (0, 5)]
        moduli = choose_block_moduli(block, 0.01)
        assert sup_error(moduli, block) <= 0.01
        with pytest.raises(DomainError):
            choose_block_moduli(block, 0)

    def test_discretization_distance(self):
        assert discretization_distance(CoprimeModuli((67,)), (1,)) == pytest.approx(0.0541, abs=1e-4)
        assert discretization_distance(CoprimeModuli((5, 7)), (0, 0)) == pytest.approx(0, abs=1e-7)

    def test_discretize_block(self):
        disc = discretize_block([(1, -1), (2, 0)], 0.1)
        p1, p2 = disc.moduli.moduli
        assert disc.residues == [(1, p2 - 1), (2, 0)]
        assert len(set(disc.dts_indices)) == 2
        assert all(d <= 0.1 for d in disc.distances)


class TestSlots:

    def test_single_member_witness(self):
        sequence = MultiIndexSequence(1, RC, [(1,)])
        block = plan_block(sequence, 0, [1], moduli=CoprimeModuli((67,)))
        slot = block.slots[0]
        assert slot.frequencies() == [1]
        assert slot.truncation_error == pytest.approx(0.0271, abs=1e-4)
        assert slot.discretization_error == pytest.approx(0.0541, abs=1e-4)
        assert abs(slot.coefficients()[0]) == pytest.approx(0.99963, abs=1e-5)

    def test_first_block_defaults_to_thirteen(self):
        block = plan_block(MultiIndexSequence(1, RC, [(1,)]), 0, [1])
        assert block.moduli.moduli == (13,)

    def test_coarse_moduli_are_rejected(self):
        sequence = MultiIndexSequence(1, RC, [(1,), (2,), (3,)])
        with pytest.raises(PreconditionError):
            plan_block(sequence, 1, [2, 3], moduli=CoprimeModuli((5,)))

    def test_block_polys_match_the_plan(self, small_plan, small_sequence):
        block = small_plan.block(1)
        components = [small_sequence.components(n) for n in (2, 3)]
        slots = build_block_polys(components, 1, RC, block.moduli, first_member=2)
        assert [s.n for s in slots] == [2, 3]
        assert [s.residues for s in slots] == [s.residues for s in block.slots]
        assert all(s.budget == 4 and s.shift == 0 for s in slots)
        with pytest.raises(DomainError):
            build_block_polys(components, 1, 'xyz', block.moduli)

    def test_slot_norm_matches_coefficients(self, small_plan):
        for slot in small_plan.slots:
            norm_sq = float(np.sum(np.abs(slot.coefficients()) ** 2))
            assert norm_sq == pytest.approx(slot.norm_sq, abs=1e-12)
            assert norm_sq <= 1 + 1e-12

    def test_residues_of_grid_frequencies(self, small_plan):
        slot = small_plan.slot(5)
        grid = 97
        assert slot.frequency_residues(grid).tolist() == [m % grid for m in slot.frequencies()]
        assert all(slot.contains(m) for m in slot.frequencies())
        assert not slot.contains(max(slot.frequencies()) + 1)


class TestShifts:

    def test_first_block_keeps_its_frequencies(self, small_plan):
        assert small_plan.blocks[0].shift == 0

    def test_overlapping_blocks_are_moved_past_the_running_maximum(self):
        sequence = MultiIndexSequence(1, RC, [(1,), (2,), (3,)])
        block = plan_block(sequence, 1, [2, 3])
        shifts = assign_shifts([block, block])
        assert shifts[0] == 0
        assert block.with_shift(shifts[1]).bounds()[0] == block.bounds()[1] + 1

    def test_disjoint_blocks_keep_shift_zero(self):
        sequence = MultiIndexSequence(1, RC, [(1,), (2,), (3,)])
        first = plan_block(sequence, 0, [1], moduli=CoprimeModuli((13,)))
        second = plan_block(sequence, 1, [2, 3], moduli=CoprimeModuli((79,)))
        assert first.frequency_set().isdisjoint(second.frequency_set())
        assert assign_shifts([first, second]) == [0, 0]

    def test_unshifted_blocks_keep_negative_frequencies(self):
        sequence = MultiIndexSequence(1, RC, [(1,), (2,), (3,)])
        first = plan_block(sequence, 0, [1], moduli=CoprimeModuli((13,)))
        second = plan_block(sequence, 1, [2, 3], moduli=CoprimeModuli((79,)))
        assert assign_shifts([first, second]) == [0, 0]
        assert second.bounds()[0] < 0

    def test_shift_leaves_errors_unchanged(self, small_plan):
        for block in small_plan.blocks:
            assert block.with_shift(0).eps == block.eps


class TestPlanStructure:

    def test_offsets_for_eight_members(self):
        plan = build_reduction(random_multi_indices(8, 2, 1, seed=5), 8)
        assert plan.offsets == [0, 1, 5, 9, 25, 41, 57, 73, 137]
        assert plan.total_terms == 137
        assert audit_plan(plan).passed

    def test_small_plan_audit_is_exhaustive(self, small_plan):
        audit = audit_plan(small_plan)
        assert audit.passed, audit.violations
        assert audit.exhaustive
        assert 'distinct_frequencies' in audit.checks
        assert 'truncation_law' in audit.checks

    def test_frequencies_are_distinct(self, small_plan):
        freqs = small_plan.frequencies()
        assert len(freqs) == len(set(freqs)) == small_plan.total_terms

    def test_rearrangement_is_an_injection(self, small_plan):
        mapping = small_plan.rearrangement()
        assert sorted(mapping) == list(range(1, small_plan.total_terms + 1))
        assert len(set(mapping.values())) == len(mapping)
        assert mapping[1] == small_plan.slots[0].frequencies()[0]

    def test_error_law_up_to_block_eight(self):
        plan = build_reduction(random_multi_indices(511, 2, 11, seed=9), 511)
        assert [block.k for block in plan.blocks] == list(range(9))
        for block in plan.blocks:
            assert block.eps <= Config.BLOCK_ERROR_CONSTANT * 2.0 ** -block.k
        assert audit_plan(plan).passed

    def test_large_plan_structure(self):
        start = time.perf_counter()
        plan = build_reduction(random_multi_indices(4096, 2, 32, seed=13), 4096)
        audit = audit_plan(plan)
        assert audit.passed, audit.violations[:3]
        assert not audit.exhaustive
        for n in range(1, plan.size + 1):
            k = n.bit_length() - 1
            assert plan.offsets[n] - plan.offsets[n - 1] == 4 ** k
            assert plan.offsets[n - 1] <= n ** 4
        assert time.perf_counter() - start < 60

    def test_src_plan(self):
        sequence = random_src_polynomials(7, 2, 3, 2, seed=4)
        plan = build_reduction(sequence, 7)
        assert audit_plan(plan).passed
        for slot in plan.slots:
            k = slot.n.bit_length() - 1
            assert slot.truncation_error <= 2.0 ** -(k + 1)
            assert slot.norm_sq <= 1 + 1e-12
            assert len(slot.residues) == 3

    def test_src_offset_bound_is_reported_not_enforced(self):
        plan = build_reduction(random_src_polynomials(7, 2, 3, 2, seed=4), 7)
        audit = audit_plan(plan)
        measured = audit.measurements['offset_bound']
        assert measured['enforced'] is False
        worst = measured['worst_n']
        assert measured['max_ratio'] == pytest.approx(plan.offsets[worst - 1] / worst ** 4)
        assert measured['exceeded'] == sum(plan.offsets[n - 1] > n ** 4 for n in range(1, 8))
        assert 'offset_bound' not in {v['invariant'] for v in audit.violations}
        assert audit.to_json()['measurements']['offset_bound']['enforced'] is False

    def test_rc_offset_bound_is_enforced(self, small_plan):
        measured = audit_plan(small_plan).measurements['offset_bound']
        assert measured['enforced'] is True
        assert measured['exceeded'] == 0
        assert measured['max_ratio'] <= 1

    def test_prefix_length_checks(self, small_sequence):
        with pytest.raises(DomainError):
            build_reduction(small_sequence, 0)
        with pytest.raises(DomainError):
            build_reduction(small_sequence, 16)

    def test_materialization_cap(self, small_plan, monkeypatch):
        monkeypatch.setattr(Config, 'MAX_MATERIALIZED_TERMS', 10)
        with pytest.raises(PreconditionError):
            small_plan.coefficients()


class TestSerialization:

    def test_members_carry_their_vectors(self, small_plan, small_sequence):
        data = small_plan.to_json()
        first = data['blocks'][0]['members'][0]
        assert first['n_vec'] == list(small_sequence.entries[0])
        assert data['offsets'] == small_plan.offsets

    def test_plan_json_roundtrip(self, small_plan):
        data = json.loads(json.dumps(small_plan.to_json()))
        restored = ReductionPlan.from_json(data)
        assert restored.to_json() == data
        assert restored.frequencies() == small_plan.frequencies()

    def test_src_members_carry_their_polynomials(self):
        plan = build_reduction(random_src_polynomials(3, 1, 2, 4, seed=2), 3)
        member = plan.to_json()['blocks'][1]['members'][0]
        assert member['polynomial']['dim'] == 1
        assert len(member['polynomial']['terms']) == 2

    def test_offsets_must_match_widths(self, small_plan):
        data = json.loads(json.dumps(small_plan.to_json()))
        data['offsets'][-1] += 1
        with pytest.raises(DomainError):
            ReductionPlan.from_json(data)


class TestCoefficients:

    def test_map_coefficients(self, small_plan):
        a = 1 / np.arange(1, small_plan.size + 1)
        c = map_coefficients(small_plan, a)
        assert len(c) == small_plan.total_terms
        start, end = small_plan.offsets[4], small_plan.offsets[5]
        assert np.allclose(c[start:end], a[4] * small_plan.slot(5).coefficients())

    def test_series_identity(self, small_plan):
        a = 1 / np.arange(1, small_plan.size + 1)
        assert series_identity_gap(small_plan, a, 1024) <= 1e-12
        src = build_reduction(random_src_polynomials(7, 2, 3, 2, seed=4), 7)
        assert series_identity_gap(src, np.ones(7), 1024) <= 1e-12

    def test_too_many_coefficients(self, small_plan):
        with pytest.raises(DomainError):
            map_coefficients(small_plan, np.ones(small_plan.size + 1))

    def test_weight_transfer_for_log_squared(self):
        plan = build_reduction(random_multi_indices(256, 2, 8, seed=17), 256)
        a = 1 / np.arange(1, 257)
        report = verify_weight_transfer(plan, a, WeightSequence.log2())
        assert report.holds
        assert report.c_star <= 17
        assert report.lhs_exact
        assert report.lhs <= report.c_star * report.rhs

    def test_weight_transfer_rejects_constant_weights(self, small_plan):
        with pytest.raises(DomainError):
            verify_weight_transfer(small_plan, np.ones(small_plan.size), WeightSequence.constant(2))


class TestCertificates:

    def test_every_block_is_certified(self, small_plan):
        for block in small_plan.blocks:
            certificate = block_equivalence_certificate(small_plan, block.k)
            assert certificate.holds
            assert certificate.order == math.prod(certificate.moduli)
            for member, slot in zip(certificate.members, block.slots):
                assert member['witness_distance'] == slot.truncation_error
                assert member['dts'][0]['index'] == slot.residues[0]

    def test_single_member_certificate(self):
        block = plan_block(MultiIndexSequence(1, RC, [(1,)]), 0, [1], moduli=CoprimeModuli((67,)))
        member = certify_block(block).members[0]
        assert member['n_vec'] == [1]
        assert member['witness_distance'] == pytest.approx(0.0271, abs=1e-4)
        assert member['discretization_distance'] == pytest.approx(0.0541, abs=1e-4)
        assert member['total_distance'] == pytest.approx(0.0812, abs=2e-4)

    def test_shift_is_checked_term_by_term(self, small_plan):
        block = small_plan.block(1)
        certificate = certify_block(block)
        assert certificate.shift_invariant
        moved = replace(block.slots[0], shift=block.shift + 1)
        broken = certify_block(replace(block, slots=[moved] + block.slots[1:]))
        assert not broken.shift_invariant
        assert not broken.holds

    def test_eps_is_recomputed_from_the_inputs(self, small_plan):
        block = small_plan.block(2)
        certificate = certify_block(block)
        assert certificate.eps == pytest.approx(block.eps, rel=1e-9)
        assert certificate.eps_consistent
        inflated = replace(block.slots[0], discretization_error=1.0)
        broken = certify_block(replace(block, slots=[inflated] + block.slots[1:]))
        assert broken.plan_eps > 1
        assert broken.eps == pytest.approx(certificate.eps, rel=1e-9)
        assert not broken.eps_consistent
        assert not broken.holds

    def test_src_certificate_recomputes_polynomial_inputs(self):
        plan = build_reduction(random_src_polynomials(7, 2, 3, 2, seed=4), 7)
        for block in plan.blocks:
            certificate = block_equivalence_certificate(plan, block.k)
            assert certificate.eps_consistent
            assert certificate.shift_invariant

    def test_unknown_block(self, small_plan):
        with pytest.raises(DomainError):
            block_equivalence_certificate(small_plan, 9)
