"""
CRT Construction

Index map tau (Chinese remaindering), the twisted cell bijection tau_bar,
the cell map Theta it induces, and exact verification that Theta carries
the multiple DTS onto the one-dimensional DTS of order p = p_1 * ... * p_d.
All congruence arithmetic is exact integer arithmetic.
"""

import functools
import itertools
import logging
import math
import operator
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from engines.dts_core import DiscreteTrigSystem
from engines.mp_equiv import CellPartition, MPCellMap, StepFunction, verify_eps_equiv, verify_prob_equiv
from utils.errors import ConsistencyError, DomainError

logger = logging.getLogger(__name__)

# Deterministic Miller-Rabin witnesses for n < 3.3e24
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Miller-Rabin primality test"""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n"""
    candidate = max(2, n)
    while not is_prime(candidate):
        candidate += 1
    return candidate


def primes_from(start: int) -> Iterator[int]:
    p = next_prime(start)
    while True:
        yield p
        p = next_prime(p + 1)


def crt(residues: Sequence[int], moduli: Sequence[int]) -> Tuple[int, int]:
    """
    Chinese Remainder Theorem

    Args:
        residues: c_1..c_d
        moduli: pairwise coprime n_1..n_d

    Returns:
        tuple: (x, n) where n = prod(moduli) and x = c_j mod n_j for every j

    Raises:
        DomainError: The moduli share a nontrivial common factor.
    """
    if len(residues) != len(moduli):
        raise DomainError(f"{len(residues)} residues for {len(moduli)} moduli")
    prod_n = functools.reduce(operator.mul, moduli, 1)
    result = 0
    for c, n in zip(residues, moduli):
        m = prod_n // n
        if math.gcd(m, n) != 1:
            raise DomainError(f"Moduli {tuple(moduli)} are not pairwise coprime")
        result += c * m * pow(m, -1, n)
    return result % prod_n, prod_n


@dataclass(frozen=True)
class CoprimeModuli:
    """Pairwise coprime axis moduli p_1..p_d with product p"""

    moduli: Tuple[int, ...]

    def __post_init__(self):
        moduli = tuple(int(p) for p in self.moduli)
        if not moduli:
            raise DomainError("At least one modulus is required")
        if any(p < 2 for p in moduli):
            raise DomainError(f"Moduli must be >= 2, got {moduli}")
        for i, a in enumerate(moduli):
            for b in moduli[i + 1:]:
                if math.gcd(a, b) != 1:
                    raise DomainError(f"Moduli {moduli} are not pairwise coprime (gcd({a}, {b}) = {math.gcd(a, b)})")
        object.__setattr__(self, 'moduli', moduli)

    @classmethod
    def parse(cls, text: str) -> 'CoprimeModuli':
        """'3,5,7' -> CoprimeModuli((3, 5, 7))"""
        try:
            return cls(tuple(int(part) for part in text.split(',') if part.strip()))
        except ValueError as e:
            if isinstance(e, DomainError):
                raise
            raise DomainError(f"Cannot parse moduli '{text}'") from e

    @property
    def dimension(self) -> int:
        return len(self.moduli)

    @property
    def product(self) -> int:
        return math.prod(self.moduli)

    @property
    def cofactors(self) -> Tuple[int, ...]:
        """p / p_j per axis"""
        p = self.product
        return tuple(p // pj for pj in self.moduli)

    @property
    def twist(self) -> int:
        """q = sum_j p / p_j"""
        return sum(self.cofactors)

    @property
    def idempotents(self) -> Tuple[int, ...]:
        """e_j = 1 mod p_j and 0 mod p_i (i != j), so tau(n) = sum_j n_j e_j mod p"""
        return tuple(m * pow(m, -1, pj) % self.product for m, pj in zip(self.cofactors, self.moduli))

    def check_residues(self, n_vec: Sequence[int]) -> Tuple[int, ...]:
        n_vec = tuple(int(n) for n in n_vec)
        if len(n_vec) != self.dimension:
            raise DomainError(f"Residue vector {n_vec} does not match {self.dimension} moduli")
        for n, pj in zip(n_vec, self.moduli):
            if not 0 <= n < pj:
                raise DomainError(f"Residue {n} out of range [0, {pj})")
        return n_vec

    def residue_box(self) -> np.ndarray:
        """All residue vectors in row-major order, shape (p, d)"""
        return np.indices(self.moduli).reshape(self.dimension, -1).T

    def to_json(self) -> List[int]:
        return list(self.moduli)


def crt_tau(moduli: CoprimeModuli, n_vec: Sequence[int]) -> int:
    """The unique l in [0, p) with l = n_j (mod p_j) for all j"""
    n_vec = moduli.check_residues(n_vec)
    return crt(n_vec, moduli.moduli)[0]


def crt_tau_bar(moduli: CoprimeModuli, u_vec: Sequence[int]) -> int:
    """tau(u) * q mod p with q = sum_j p / p_j"""
    return crt_tau(moduli, u_vec) * moduli.twist % moduli.product


def crt_tau_search(moduli: CoprimeModuli, n_vec: Sequence[int]) -> int:
    """Exhaustive-search oracle for crt_tau"""
    n_vec = moduli.check_residues(n_vec)
    for l in range(moduli.product):
        if all(l % pj == n for pj, n in zip(moduli.moduli, n_vec)):
            return l
    raise ConsistencyError(f"No CRT solution for {n_vec} mod {moduli.moduli}")


def tau_table(moduli: CoprimeModuli) -> np.ndarray:
    """tau over the residue box (row-major), as int64"""
    box = moduli.residue_box().astype(object)
    values = (box * np.array(moduli.idempotents, dtype=object)).sum(axis=1) % moduli.product
    return values.astype(np.int64)


def tau_bar_table(moduli: CoprimeModuli) -> np.ndarray:
    return (tau_table(moduli).astype(object) * moduli.twist % moduli.product).astype(np.int64)


def build_theta(moduli: CoprimeModuli) -> MPCellMap:
    """Cell map sending the box cell u of the p_1 x ... x p_d partition to cell tau_bar(u) of the p-cell partition"""
    source = CellPartition(moduli.moduli)
    target = CellPartition((moduli.product,))
    theta = MPCellMap(source, target, tau_bar_table(moduli).tolist())
    logger.debug(f"🔧 Theta built for moduli {moduli.moduli}")
    return theta


def _exponent_rows(moduli: CoprimeModuli, n_vec: Sequence[int], cells: np.ndarray) -> np.ndarray:
    """sum_j n_j u_j (p / p_j) mod p for each row u of `cells`"""
    p = moduli.product
    total = np.zeros(len(cells), dtype=object)
    for axis, (n, cof) in enumerate(zip(n_vec, moduli.cofactors)):
        total = total + cells[:, axis].astype(object) * (int(n) * cof % p)
    return total % p


def dts_correspondence(moduli: CoprimeModuli, n_vec: Sequence[int], seed: Optional[int] = None) -> int:
    """
    Return n = tau(n_vec) after checking that Theta carries t^(p_vec)_n_vec to t^(p)_n.

    On each cell u the two sides are exp(2 pi i e / p) with
    e = sum_j n_j u_j (p / p_j) and e = n * tau_bar(u) (mod p). Up to
    EXHAUSTIVE_CELL_LIMIT cells every cell is compared, beyond that a seeded
    sample of CELL_SAMPLE_SIZE cells.

    Raises:
        ConsistencyError: the exponents differ on some cell
    """
    n_vec = moduli.check_residues(n_vec)
    n = crt_tau(moduli, n_vec)
    p = moduli.product
    if p <= Config.EXHAUSTIVE_CELL_LIMIT:
        cells = moduli.residue_box()
    else:
        rng = np.random.default_rng(Config.DEFAULT_SEED if seed is None else seed)
        cells = np.stack([rng.integers(0, pj, Config.CELL_SAMPLE_SIZE) for pj in moduli.moduli], axis=1)
    lhs = _exponent_rows(moduli, n_vec, cells)
    idem = np.array(moduli.idempotents, dtype=object)
    tau_u = (cells.astype(object) * idem).sum(axis=1) % p
    rhs = (tau_u * moduli.twist % p) * n % p
    mismatch = np.nonzero(lhs != rhs)[0]
    if len(mismatch):
        u = tuple(int(v) for v in cells[mismatch[0]])
        raise ConsistencyError(f"Theta(t_{n_vec}) differs from t_{n} on cell {u}")
    return n


@dataclass
class EquivalenceReport:
    """Outcome of verify_equivalence for one moduli tuple"""
    moduli: Tuple[int, ...]
    cells_checked: int
    indices_checked: int
    tau_bijective: bool
    tau_bar_bijective: bool
    congruence_failures: int
    prob_equiv: Optional[bool]
    failures: List[Dict[str, Any]] = field(default_factory=list)
    eps_equiv: Optional[bool] = None
    witness_distance: Optional[float] = None

    @property
    def passed(self) -> bool:
        return (self.tau_bijective and self.tau_bar_bijective and not self.congruence_failures
                and self.prob_equiv is not False and self.eps_equiv is not False)

    def to_json(self) -> Dict[str, Any]:
        return {
            'moduli': list(self.moduli),
            'passed': self.passed,
            'cells_checked': self.cells_checked,
            'indices_checked': self.indices_checked,
            'tau_bijective': self.tau_bijective,
            'tau_bar_bijective': self.tau_bar_bijective,
            'congruence_failures': self.congruence_failures,
            'prob_equiv': self.prob_equiv,
            'eps_equiv': self.eps_equiv,
            'witness_distance': self.witness_distance,
            'failures': self.failures,
        }


def is_bijection(values: np.ndarray, size: int) -> bool:
    return len(values) == size and bool(np.all((values >= 0) & (values < size))) \
        and len(np.unique(values)) == size


def verify_equivalence(moduli: CoprimeModuli, prob_equiv_limit: int = 210) -> EquivalenceReport:
    """
    Exhaustive check that the full multiple DTS and the full 1-d DTS reindexed
    by tau correspond under Theta.

    Checks tau and tau_bar bijectivity, the exponent congruence for every
    (n_vec, u) pair, and (for p <= prob_equiv_limit) exact equality of the
    joint distributions of both systems plus the L2 distance between
    Theta(t_n_vec) and t_tau(n_vec) for every index.
    """
    p = moduli.product
    if p > Config.EXHAUSTIVE_CELL_LIMIT:
        raise DomainError(f"Exhaustive verification needs p <= {Config.EXHAUSTIVE_CELL_LIMIT}, got {p}")
    logger.info(f"🔧 Verifying CRT correspondence for moduli {moduli.moduli} (p={p})")
    tau = tau_table(moduli)
    tau_bar = tau_bar_table(moduli)
    box = moduli.residue_box()

    failures: List[Dict[str, Any]] = []
    congruence_failures = 0
    for n_vec, n in zip(box, tau):
        lhs = _exponent_rows(moduli, n_vec, box)
        rhs = tau_bar.astype(object) * int(n) % p
        bad = np.nonzero(lhs != rhs)[0]
        congruence_failures += len(bad)
        if len(bad) and len(failures) < 10:
            failures.append({'n_vec': n_vec.tolist(), 'u_vec': box[bad[0]].tolist()})

    prob_equiv = eps_equiv = witness_distance = None
    if p <= prob_equiv_limit:
        multi = DiscreteTrigSystem(moduli.moduli)
        single = DiscreteTrigSystem((p,))
        fs = [StepFunction.from_dts(multi, n_vec) for n_vec in multi.indices()]
        gs = [StepFunction.from_dts(single, (int(n),)) for n in tau]
        prob_equiv = verify_prob_equiv(fs, gs)
        if is_bijection(tau_bar, p):
            transfer = verify_eps_equiv(fs, build_theta(moduli), gs, eps=Config.SERIES_TOLERANCE)
            eps_equiv = transfer.passed
            witness_distance = max(transfer.distances)

    report = EquivalenceReport(
        moduli=moduli.moduli,
        cells_checked=p,
        indices_checked=p,
        tau_bijective=is_bijection(tau, p),
        tau_bar_bijective=is_bijection(tau_bar, p),
        congruence_failures=congruence_failures,
        prob_equiv=prob_equiv,
        failures=failures,
        eps_equiv=eps_equiv,
        witness_distance=witness_distance,
    )
    if report.passed:
        logger.info(f"✅ Correspondence verified: {p} cells x {p} indices")
    else:
        logger.error(f"❌ Correspondence failed for moduli {moduli.moduli}: {congruence_failures} congruence failures")
    return report


def coprime_tuples(primes: Sequence[int], max_product: int, sizes: Sequence[int] = (2, 3, 4)) -> Iterator[CoprimeModuli]:
    """All tuples of distinct primes (given sizes) with product <= max_product"""
    for size in sizes:
        for combo in itertools.combinations(sorted(primes), size):
            if math.prod(combo) <= max_product:
                yield CoprimeModuli(combo)
