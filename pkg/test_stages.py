#!/usr/bin/env python3
"""
Test the pipeline stages behind the run_* orchestration functions
"""

import numpy as np
import pytest

from engines.crt_construction import CoprimeModuli
from engines.weights import WeightSequence
from main import run_maxima, run_verify_equiv
from stages.equivalence_stage import EquivalenceStage
from stages.maxima_stage import BlockMaximaStage
from stages.reduction_stage import ReductionStage
from stages.transfer_stage import TransferStage
from utils.errors import DomainError


class TestEquivalenceStage:

    def test_single_tuple_with_distribution(self):
        stage = EquivalenceStage()
        assert stage.name == "EquivalenceStage"
        report, distribution = stage.execute(CoprimeModuli((3, 5)), with_distribution=True)
        assert report.passed
        assert len(distribution) == 15
        assert all(row['measure'] == {'num': 1, 'den': 15} for row in distribution)

    def test_distribution_limit(self):
        with pytest.raises(DomainError):
            EquivalenceStage(distribution_limit=10).execute(CoprimeModuli((3, 5)), with_distribution=True)
        with pytest.raises(DomainError):
            run_verify_equiv(CoprimeModuli((11, 23)), with_distribution=True)

    def test_sweep(self):
        reports = EquivalenceStage().execute_sweep(30, prime_limit=7)
        assert [r.moduli for r in reports] == [(2, 3), (2, 5), (2, 7), (3, 5), (3, 7), (2, 3, 5)]
        assert all(r.passed for r in reports)


class TestReductionStage:

    def test_execute_and_certify(self, small_sequence):
        stage = ReductionStage()
        assert stage.name == "ReductionStage"
        plan, audit = stage.execute(small_sequence, 15)
        assert audit.passed, audit.violations
        assert plan.offsets[:4] == [0, 1, 5, 9]
        certificates = stage.certify(plan)
        assert [c['k'] for c in certificates] == [b.k for b in plan.blocks]
        assert all(c['holds'] for c in certificates)
        assert [c['k'] for c in stage.certify(plan, [1])] == [1]


class TestTransferStage:

    def test_execute(self, small_plan):
        stage = TransferStage(grid=256)
        result = stage.execute(small_plan, 1 / np.arange(1, 16), WeightSequence.log2())
        assert result['passed'] is True
        assert result['series_identity']['grid'] == 256
        assert len(result['terms']) == small_plan.total_terms


class TestBlockMaximaStage:

    def test_execute(self, small_plan):
        report = BlockMaximaStage(grid=64).execute(small_plan, 1 / np.arange(1, 16), 2)
        assert sorted(report.maxima) == [0, 1, 2]
        assert report.grid == 64

    def test_plan_must_cover_the_last_block(self, small_plan):
        with pytest.raises(DomainError):
            BlockMaximaStage().execute(small_plan, np.ones(15), 4)
        with pytest.raises(DomainError):
            run_maxima(small_plan, np.ones(15), 4, 64)
