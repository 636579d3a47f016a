#!/usr/bin/env python3
"""
Test weight presets, admissibility and the weight diagnostics report
"""

import json
import math

import numpy as np
import pytest

from engines.convergence_lab import weight_check
from engines.weights import WeightSequence
from utils.errors import DomainError


class TestPresets:

    def test_parse(self):
        assert WeightSequence.parse('log').name == 'log'
        assert WeightSequence.parse(' log2 ').name == 'log2'
        assert WeightSequence.parse('pow:0.5').name == 'pow:0.5'
        assert WeightSequence.parse('const:3').name == 'const:3'

    def test_parse_errors(self):
        for spec in ('bogus', 'pow:x', 'pow', 'table:'):
            with pytest.raises(DomainError):
                WeightSequence.parse(spec)

    def test_values(self):
        w = WeightSequence.log2()
        assert w(1) == pytest.approx(math.log(3) ** 2)
        assert isinstance(w(5), float)
        assert np.allclose(w.values(3), [math.log(n + 2) ** 2 for n in (1, 2, 3)])

    def test_table_from_json_and_text(self, tmp_path):
        json_path = tmp_path / 'w.json'
        json_path.write_text(json.dumps([1, 2, 4]))
        text_path = tmp_path / 'w.txt'
        text_path.write_text('1\n2\n4\n')
        for path in (json_path, text_path):
            w = WeightSequence.parse(f'table:{path}')
            assert w.values(3).tolist() == [1, 2, 4]
            with pytest.raises(DomainError):
                w(4)

    def test_missing_table(self, tmp_path):
        with pytest.raises(DomainError):
            WeightSequence.table(str(tmp_path / 'absent.json'))


class TestAdmissibility:

    def test_log_weights_are_admissible(self):
        WeightSequence.log().assert_admissible(10 ** 7)
        WeightSequence.log2().assert_admissible(10 ** 7)

    def test_constant_weight_is_rejected(self):
        with pytest.raises(DomainError):
            WeightSequence.constant(1).assert_admissible(100)

    def test_decreasing_table_is_rejected(self, tmp_path):
        path = tmp_path / 'w.json'
        path.write_text(json.dumps([1, 2, 3, 2.5, 4]))
        with pytest.raises(DomainError):
            WeightSequence.table(str(path)).assert_admissible(5)

    def test_sample_points_cover_the_range(self):
        points = WeightSequence.log().sample_points(10 ** 6)
        assert points[0] == 1
        assert points[-1] == 10 ** 6
        assert np.all(np.diff(points) > 0)


class TestWeightCheck:

    def test_log2(self):
        report = weight_check(WeightSequence.log2(), 10 ** 6)
        assert report.passed
        assert report.strictly_increasing
        assert report.doubling_constant <= 4.2

    def test_log(self):
        report = weight_check(WeightSequence.log(), 10 ** 6)
        assert report.passed
        assert report.doubling_constant <= 2.1

    def test_power_weight_fails_doubling(self):
        report = weight_check(WeightSequence.power(1), 10 ** 4)
        assert report.doubling_constant == pytest.approx(100)
        assert not report.doubling_ok
        assert not report.passed

    def test_power_weight_is_flagged_on_short_ranges(self):
        report = weight_check(WeightSequence.power(1), 100)
        assert report.doubling_constant == pytest.approx(10)
        assert report.doubling_limit < 10
        assert not report.doubling_ok
        assert not report.passed

    def test_doubling_limit_scales_with_log2_reference(self):
        for N in (100, 10 ** 4):
            report = weight_check(WeightSequence.log2(), N)
            assert report.doubling_reference == pytest.approx(report.doubling_constant)
            assert report.doubling_limit == pytest.approx(2 * report.doubling_constant)
            assert report.doubling_ok

    def test_monotonicity_violations(self, tmp_path):
        path = tmp_path / 'w.json'
        path.write_text(json.dumps([1, 2, 3, 2.5, 4, 5]))
        report = weight_check(WeightSequence.table(str(path)), 6)
        assert report.monotonicity_violations == 1
        assert report.first_violations == [4]
        assert not report.passed

    def test_report_contents(self):
        data = weight_check(WeightSequence.log2(), 1024).to_json()
        assert [row['n'] for row in data['summability']] == [2 ** j for j in range(11)]
        assert [row['n'] for row in data['envelope']] == [256, 512, 1024]
        assert data['summability_note']
        assert data['passed'] is True

    def test_short_range(self):
        with pytest.raises(DomainError):
            weight_check(WeightSequence.log(), 3)
