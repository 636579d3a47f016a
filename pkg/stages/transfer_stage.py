import logging
from typing import Any, Dict, Sequence

from config import Config
from engines.reduction import ReductionPlan, map_coefficients, series_identity_gap, verify_weight_transfer
from engines.weights import WeightSequence

logger = logging.getLogger(__name__)


class TransferStage:
    """Stage carrying coefficients a_n through a plan: c_s = a_n b_s, weight transfer and series identity"""

    def __init__(self, grid: int = 1024):
        self.name = "TransferStage"
        self.grid = grid

    def execute(self, plan: ReductionPlan, a: Sequence[complex], w: WeightSequence) -> Dict[str, Any]:
        """
        Returns:
            Dict: transfer report, identity gap (materialisable plans), the c_s
            terms when the plan is small enough to emit, and the overall verdict
        """
        logger.info(f"🔧 {self.name}: {len(a)} coefficients through a {plan.mode.upper()} plan (w={w.name})")
        transfer = verify_weight_transfer(plan, a, w)
        result: Dict[str, Any] = {'transfer': transfer.to_json(), 'tolerance': Config.SERIES_TOLERANCE}
        passed = transfer.holds

        if plan.is_materializable:
            logger.info(f"📊 Checking series identity on a {self.grid}-point grid...")
            gap = series_identity_gap(plan, a, self.grid)
            result['series_identity'] = {'grid': self.grid, 'max_gap': gap, 'holds': gap <= Config.SERIES_TOLERANCE}
            passed &= gap <= Config.SERIES_TOLERANCE
            if plan.total_terms <= Config.MAX_EMITTED_TERMS:
                c = map_coefficients(plan, a)
                result['terms'] = [{'s': s, 'm': m, 're': v.real, 'im': v.imag}
                                   for (s, m, _), v in zip(plan.iter_terms(), c)]
        else:
            logger.warning(f"⚠️  Plan has {plan.total_terms} terms; series identity skipped")

        result['passed'] = bool(passed)
        return result
