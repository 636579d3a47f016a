import logging
from typing import Sequence

from engines.convergence_lab import BlockMaximaReport, PlanSystemEvaluator, block_maxima
from engines.reduction import ReductionPlan
from utils.errors import DomainError

logger = logging.getLogger(__name__)


class BlockMaximaStage:
    """Stage evaluating dyadic block maxima of sum a_n g_n over a plan's slot polynomials"""

    def __init__(self, grid: int = 512, shifted: bool = True):
        self.name = "BlockMaximaStage"
        self.grid = grid
        self.shifted = shifted

    def execute(self, plan: ReductionPlan, a: Sequence[complex], k_max: int) -> BlockMaximaReport:
        needed = 2 ** (k_max + 1) - 1
        if needed > plan.size:
            raise DomainError(f"k_max={k_max} needs a plan of at least {needed} members, got {plan.size}")
        logger.info(f"🔧 {self.name}: k <= {k_max} on a {self.grid}-point grid")
        return block_maxima(PlanSystemEvaluator(plan, self.shifted), a, k_max, self.grid)
