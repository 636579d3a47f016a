import itertools
import logging
from typing import List, Optional, Tuple

from engines.crt_construction import CoprimeModuli, EquivalenceReport, coprime_tuples, primes_from, tau_table, verify_equivalence
from engines.dts_core import DiscreteTrigSystem
from engines.mp_equiv import StepFunction, joint_distribution
from utils.errors import DomainError

logger = logging.getLogger(__name__)


class EquivalenceStage:
    """Stage verifying the CRT correspondence between multiple and one-dimensional DTS"""

    def __init__(self, distribution_limit: int = 210):
        self.name = "EquivalenceStage"
        self.distribution_limit = distribution_limit

    def execute(self, moduli: CoprimeModuli, with_distribution: bool = False) -> Tuple[EquivalenceReport, Optional[List]]:
        """
        Exhaustive correspondence check for one moduli tuple

        Args:
            moduli: Pairwise coprime moduli p_1..p_d
            with_distribution: Also return the joint distribution of the full
                one-dimensional system reindexed by tau

        Returns:
            The report, and the serialized distribution when requested
        """
        logger.info(f"🔧 {self.name}: moduli {moduli.moduli} (p={moduli.product})")
        if with_distribution and moduli.product > self.distribution_limit:
            raise DomainError(f"Distribution export needs p <= {self.distribution_limit}, got {moduli.product}")
        report = verify_equivalence(moduli, prob_equiv_limit=self.distribution_limit)
        distribution = None
        if with_distribution:
            single = DiscreteTrigSystem((moduli.product,))
            gs = [StepFunction.from_dts(single, (int(n),)) for n in tau_table(moduli)]
            distribution = joint_distribution(gs).to_json()
            logger.info(f"📊 Joint distribution has {len(distribution)} atoms")
        return report, distribution

    def execute_sweep(self, max_product: int, prime_limit: int = 31) -> List[EquivalenceReport]:
        """verify_equivalence over every tuple of 2 to 4 distinct primes <= prime_limit with product <= max_product"""
        primes = list(itertools.takewhile(lambda p: p <= prime_limit, primes_from(2)))
        logger.info(f"🔧 {self.name}: coprime tuples of primes <= {prime_limit} with product <= {max_product}")
        reports = [verify_equivalence(moduli, prob_equiv_limit=self.distribution_limit)
                   for moduli in coprime_tuples(primes, max_product)]
        failed = sum(not r.passed for r in reports)
        if failed:
            logger.error(f"❌ {failed} of {len(reports)} tuples failed")
        else:
            logger.info(f"✅ All {len(reports)} tuples verified")
        return reports
