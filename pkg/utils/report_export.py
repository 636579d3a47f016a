"""
Report Export Utilities for the Trigonometric Equivalence Lab
Writes block-maxima reports as CSV, spreadsheet and SVG decay chart
"""

import csv
import logging
import os
from typing import Dict, List, Optional

from openpyxl import Workbook
from openpyxl.styles import Font

from engines.convergence_lab import BlockMaximaReport
from utils.errors import ArtifactError

logger = logging.getLogger(__name__)

MAXIMA_COLUMNS = ['k', 'sup_Mk', 'mean_Mk', 'q50', 'q90', 'q99']


def _prepare(output_path: str) -> None:
    folder = os.path.dirname(output_path)
    if folder:
        os.makedirs(folder, exist_ok=True)


def maxima_rows(report: BlockMaximaReport) -> List[List]:
    return [[row[c] for c in MAXIMA_COLUMNS] for row in report.rows()]


def export_maxima_csv(report: BlockMaximaReport, output_path: str) -> str:
    """
    Export block maxima summaries as CSV (one row per k, header first)

    Args:
        report: Block maxima of one system
        output_path: Destination file

    Returns:
        Path to the written file
    """
    try:
        _prepare(output_path)
        with open(output_path, 'w', newline='', encoding='utf-8') as csvfile:
            writer = csv.writer(csvfile, lineterminator='\n')
            writer.writerow(MAXIMA_COLUMNS)
            for row in maxima_rows(report):
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    except OSError as e:
        raise ArtifactError(f"Cannot write {output_path}: {e.strerror or e}") from e
    logger.info(f"✅ Maxima CSV written to {output_path}")
    return output_path


def read_maxima_csv(path: str) -> List[Dict[str, float]]:
    try:
        with open(path, 'r', newline='', encoding='utf-8') as csvfile:
            reader = csv.DictReader(csvfile)
            if reader.fieldnames != MAXIMA_COLUMNS:
                raise ArtifactError(f"{path} does not have the columns {', '.join(MAXIMA_COLUMNS)}")
            return [{c: (int(r[c]) if c == 'k' else float(r[c])) for c in MAXIMA_COLUMNS} for r in reader]
    except FileNotFoundError as e:
        raise ArtifactError(f"Input file not found: {path}") from e


def export_maxima_xlsx(report: BlockMaximaReport, output_path: str,
                       metadata: Optional[Dict] = None) -> str:
    """Spreadsheet copy of the maxima table; a second sheet lists the run metadata"""
    wb = Workbook()
    ws = wb.active
    ws.title = 'maxima'
    ws.append(MAXIMA_COLUMNS)
    for cell in ws[1]:
        cell.font = Font(bold=True)
    for row in maxima_rows(report):
        ws.append(row)

    info = wb.create_sheet('run')
    info.append(['key', 'value'])
    for key, value in [('system', report.system), ('grid', report.grid), ('dim', report.dim)] + \
            sorted((metadata or {}).items()):
        info.append([key, str(value)])

    try:
        _prepare(output_path)
        wb.save(output_path)
    except OSError as e:
        raise ArtifactError(f"Cannot write {output_path}: {e.strerror or e}") from e
    logger.info(f"✅ Maxima workbook written to {output_path}")
    return output_path


def export_decay_plot(report: BlockMaximaReport, output_path: str, eps: Optional[Dict[int, float]] = None) -> str:
    """
    Static SVG chart of sup M_k, mean M_k and the q90 quantile against k on a
    log scale, with the 2^-k reference line (and block errors eps_k when given).
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    rows = report.rows()
    ks = [r['k'] for r in rows]
    plt.rcParams['svg.hashsalt'] = 'block-maxima'
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ks, [r['sup_Mk'] for r in rows], 'o-', label='sup $M_k$')
    ax.semilogy(ks, [r['mean_Mk'] for r in rows], 's-', label='mean $M_k$')
    ax.semilogy(ks, [r['q90'] for r in rows], '^--', label='q90')
    ax.semilogy(ks, [2.0 ** -k for k in ks], 'k:', label='$2^{-k}$')
    if eps:
        ax.semilogy(sorted(eps), [eps[k] for k in sorted(eps)], 'x-.', label=r'$\varepsilon_k$')
    ax.set_xlabel('k')
    ax.set_ylabel('block maximum')
    ax.set_title(f'{report.system} system, grid {report.grid}^{report.dim}')
    ax.legend()
    fig.tight_layout()
    try:
        _prepare(output_path)
        fig.savefig(output_path, format='svg', metadata={'Date': None})
    except OSError as e:
        raise ArtifactError(f"Cannot write {output_path}: {e.strerror or e}") from e
    finally:
        plt.close(fig)
    logger.info(f"✅ Decay chart written to {output_path}")
    return output_path
