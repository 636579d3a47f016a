import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

from engines.reduction import (
    MultiIndexSequence,
    PlanAudit,
    ReductionPlan,
    audit_plan,
    block_equivalence_certificate,
    build_reduction,
)

logger = logging.getLogger(__name__)


class ReductionStage:
    """Stage building, auditing and certifying reduction plans"""

    def __init__(self, reported_violations: int = 5):
        self.name = "ReductionStage"
        self.reported_violations = reported_violations

    def execute(self, sequence: MultiIndexSequence, N: int) -> Tuple[ReductionPlan, PlanAudit]:
        """
        Build and audit the plan for members 1..N

        Args:
            sequence: RC vectors or SRC polynomials
            N: Prefix length

        Returns:
            The plan and its structural audit
        """
        logger.info(f"🔧 {self.name}: {sequence.mode.upper()} reduction, N={N}, d={sequence.dim}")
        plan = build_reduction(sequence, N)
        logger.info(f"📊 {len(plan.blocks)} blocks, {plan.total_terms} terms")
        audit = audit_plan(plan)
        for violation in audit.violations[:self.reported_violations]:
            logger.warning(f"⚠️  {violation['invariant']}: {violation['detail']}")
        return plan, audit

    def certify(self, plan: ReductionPlan, ks: Optional[Sequence[int]] = None) -> List[Dict[str, Any]]:
        """Block equivalence certificates for the given blocks (all blocks by default)"""
        ks = [b.k for b in plan.blocks] if ks is None else ks
        certificates = [block_equivalence_certificate(plan, k).to_json() for k in ks]
        held = sum(c['holds'] for c in certificates)
        logger.info(f"📊 {self.name}: {held} of {len(certificates)} block certificates hold")
        return certificates
