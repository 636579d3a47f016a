#!/usr/bin/env python3
"""
Test the CSV, spreadsheet and SVG exports of block maxima reports
"""

import numpy as np
import pytest
from openpyxl import load_workbook

from engines.convergence_lab import TrigSystemEvaluator, block_maxima
from utils.errors import ArtifactError
from utils.report_export import (
    MAXIMA_COLUMNS,
    export_decay_plot,
    export_maxima_csv,
    export_maxima_xlsx,
    read_maxima_csv,
)


@pytest.fixture(scope='module')
def report():
    return block_maxima(TrigSystemEvaluator(), 1 / np.arange(1, 16), 3, 64)


def test_csv_round_trip(report, tmp_path):
    path = export_maxima_csv(report, str(tmp_path / 'reports' / 'maxima.csv'))
    rows = read_maxima_csv(path)
    assert [row['k'] for row in rows] == [0, 1, 2, 3]
    assert rows[0]['sup_Mk'] == pytest.approx(1)
    assert rows == report.rows()


def test_csv_header_is_checked(tmp_path):
    path = tmp_path / 'other.csv'
    path.write_text('k,sup\n0,1.0\n')
    with pytest.raises(ArtifactError):
        read_maxima_csv(str(path))
    with pytest.raises(ArtifactError):
        read_maxima_csv(str(tmp_path / 'absent.csv'))


def test_workbook(report, tmp_path):
    path = export_maxima_xlsx(report, str(tmp_path / 'maxima.xlsx'), {'seed': 42})
    wb = load_workbook(path)
    assert wb.sheetnames == ['maxima', 'run']
    header = [cell.value for cell in wb['maxima'][1]]
    assert header == MAXIMA_COLUMNS
    assert wb['maxima'].max_row == 5
    run = {row[0]: row[1] for row in wb['run'].iter_rows(min_row=2, values_only=True)}
    assert run['system'] == 'trig'
    assert run['seed'] == '42'


def test_decay_plot(report, tmp_path):
    path = export_decay_plot(report, str(tmp_path / 'decay.svg'), eps={0: 0.1, 1: 0.05})
    with open(path, encoding='utf-8') as f:
        assert '<svg' in f.read()
