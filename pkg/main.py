import logging
import math
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from engines.convergence_lab import BlockMaximaReport, WeightCheckReport, weight_check
from engines.crt_construction import CoprimeModuli, EquivalenceReport, build_theta
from engines.dts_core import DiscreteTrigSystem, dts_fourier_coeff, dts_spectrum, dts_table
from engines.mp_equiv import AxiomReport, MPCellMap, mp_check_axioms
from engines.reduction import (
    SRC,
    MultiIndexSequence,
    PlanAudit,
    ReductionPlan,
    random_multi_indices,
    random_src_polynomials,
)
from engines.weights import WeightSequence
from stages.equivalence_stage import EquivalenceStage
from stages.maxima_stage import BlockMaximaStage
from stages.reduction_stage import ReductionStage
from stages.transfer_stage import TransferStage
from utils.errors import DomainError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    """Configure logging once for a run (stderr, so stdout stays clean for verdicts)"""
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )


# ---------------------------------------------------------------------------
# DTS tables
# ---------------------------------------------------------------------------

def run_dts(orders: Sequence[int], with_coeffs: bool = False, m_max: int = 4,
            half_width: int = 2) -> Dict[str, Any]:
    """
    Tabulate a one-dimensional (one order) or multiple (several orders) DTS

    Args:
        orders: Per-axis orders p_1..p_d
        with_coeffs: Also list the Fourier coefficients c_m for |m_j| <= m_max
        m_max: Coefficient range
        half_width: Spectrum listings keep n + l j for |j| <= half_width (d = 1)

    Returns:
        Dict: functions with exact cell values, and optional coefficient/spectrum tables
    """
    try:
        system = DiscreteTrigSystem(tuple(orders))
        logger.info(f"🚀 Tabulating DTS of orders {system.orders} ({system.order} functions)")
        if system.dimension == 1:
            l = system.order
            functions = dts_table(l)
        else:
            cells = list(system.indices())
            functions = [{'n': list(n_vec), 'values': [system.value_at_cell(n_vec, u).to_json() for u in cells]}
                         for n_vec in system.indices()]
        result: Dict[str, Any] = {'orders': list(system.orders), 'order': system.order, 'functions': functions}

        if with_coeffs:
            if m_max < 0:
                raise DomainError(f"m_max must be >= 0, got {m_max}")
            rows = []
            for n_vec in system.indices():
                for m_vec in np.ndindex(*(2 * m_max + 1,) * system.dimension):
                    m_vec = tuple(int(m) - m_max for m in m_vec)
                    c = math.prod(dts_fourier_coeff(p, n, m) for p, n, m in zip(system.orders, n_vec, m_vec))
                    if c != 0:
                        rows.append({'n': _index_json(n_vec), 'm': _index_json(m_vec), 're': c.real, 'im': c.imag})
            result['coefficients'] = rows
            logger.info(f"📊 {len(rows)} nonzero coefficients with |m| <= {m_max}")

        if system.dimension == 1:
            l = system.order
            result['spectra'] = [{'n': n, 'frequencies': list(dts_spectrum(l, n, half_width))}
                                 for n in range(l)]
        return result
    except Exception as e:
        logger.error(f"❌ DTS tabulation failed: {e}")
        raise


def _index_json(vec: Tuple[int, ...]):
    return vec[0] if len(vec) == 1 else list(vec)


# ---------------------------------------------------------------------------
# CRT correspondence
# ---------------------------------------------------------------------------

def run_crt_map(moduli: CoprimeModuli, seed: int) -> Tuple[MPCellMap, AxiomReport]:
    """Theta as a cell bijection plus its MP-map axiom check"""
    try:
        logger.info(f"🚀 Building Theta for moduli {moduli.moduli}")
        theta = build_theta(moduli)
        report = mp_check_axioms(theta, seed=seed)
        return theta, report
    except Exception as e:
        logger.error(f"❌ Cell map construction failed: {e}")
        raise


def run_verify_equiv(moduli: CoprimeModuli, with_distribution: bool = False) -> Tuple[EquivalenceReport, Optional[List]]:
    """
    Exhaustive correspondence check for one moduli tuple

    Returns:
        The report, and the joint distribution of the full one-dimensional
        system reindexed by tau when requested (p <= 210)
    """
    try:
        logger.info(f"🚀 Verifying the CRT correspondence for moduli {moduli.moduli}")
        return EquivalenceStage().execute(moduli, with_distribution)
    except Exception as e:
        logger.error(f"❌ Equivalence verification failed: {e}")
        raise


def run_verify_all(max_product: int, prime_limit: int = 31) -> List[EquivalenceReport]:
    """verify_equivalence over every tuple of 2 to 4 distinct primes <= prime_limit with product <= max_product"""
    try:
        logger.info(f"🚀 Sweeping coprime tuples with product <= {max_product}")
        return EquivalenceStage().execute_sweep(max_product, prime_limit)
    except Exception as e:
        logger.error(f"❌ Equivalence sweep failed: {e}")
        raise


# ---------------------------------------------------------------------------
# Reduction
# ---------------------------------------------------------------------------

def sample_sequence(mode: str, count: int, dim: int, seed: int, bound: Optional[int] = None,
                    terms: int = 3) -> MultiIndexSequence:
    """Seeded random input; the default bound is the smallest box holding enough distinct vectors"""
    needed = count * (terms if mode == SRC else 1)
    if bound is None:
        bound = 1
        while (2 * bound + 1) ** dim < needed:
            bound += 1
    if mode == SRC:
        return random_src_polynomials(count, dim, terms, bound, seed)
    return random_multi_indices(count, dim, bound, seed)


def run_reduce(sequence: MultiIndexSequence, N: int) -> Tuple[ReductionPlan, PlanAudit]:
    """Build and audit the reduction plan for members 1..N"""
    try:
        logger.info(f"🚀 Starting {sequence.mode.upper()} reduction: N={N}, d={sequence.dim}")
        return ReductionStage().execute(sequence, N)
    except Exception as e:
        logger.error(f"❌ Reduction failed: {e}")
        raise


def run_certificates(plan: ReductionPlan, ks: Optional[Sequence[int]] = None) -> List[Dict[str, Any]]:
    try:
        return ReductionStage().certify(plan, ks)
    except Exception as e:
        logger.error(f"❌ Certification failed: {e}")
        raise


def harmonic_coefficients(N: int) -> np.ndarray:
    """a_n = 1/n"""
    return 1.0 / np.arange(1, N + 1)


def parse_coefficients(data: Sequence[Any]) -> np.ndarray:
    return np.array([complex(v['re'], v['im']) if isinstance(v, dict) else complex(v) for v in data])


def run_coeffs(plan: ReductionPlan, a: Sequence[complex], w: WeightSequence,
               grid: int = 1024) -> Dict[str, Any]:
    """
    Coefficient map c_s = a_n b_s, the weight transfer inequality and the
    series reorganisation identity on a grid
    """
    try:
        logger.info(f"🚀 Transferring coefficients (w={w.name})")
        return TransferStage(grid).execute(plan, a, w)
    except Exception as e:
        logger.error(f"❌ Coefficient transfer failed: {e}")
        raise


# ---------------------------------------------------------------------------
# Convergence lab
# ---------------------------------------------------------------------------

def run_maxima(plan: ReductionPlan, a: Sequence[complex], k_max: int, grid: int) -> BlockMaximaReport:
    """Block maxima of sum a_n g_n over the plan's slot polynomials"""
    try:
        logger.info(f"🚀 Block maxima for k <= {k_max} on a {grid}-point grid")
        return BlockMaximaStage(grid).execute(plan, a, k_max)
    except Exception as e:
        logger.error(f"❌ Block maxima failed: {e}")
        raise


def run_weight_check(w: WeightSequence, N: int) -> WeightCheckReport:
    try:
        logger.info(f"🚀 Weight check for {w.name} on 1..{N}")
        return weight_check(w, N)
    except Exception as e:
        logger.error(f"❌ Weight check failed: {e}")
        raise


def load_sequence(data: Any, mode: Optional[str] = None) -> MultiIndexSequence:
    """Reduction input from parsed JSON; a bare list is read as RC vectors"""
    sequence = MultiIndexSequence.from_json(data)
    if mode is not None and sequence.mode != mode:
        raise DomainError(f"Input is a {sequence.mode.upper()} sequence, --mode asked for {mode.upper()}")
    return sequence

