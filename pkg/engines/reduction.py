"""
Reduction Pipeline

Maps a sequence of d-dimensional trigonometric functions (RC mode) or of
non-overlapping d-dimensional polynomials (SRC mode) to a one-dimensional
system of non-overlapping polynomials g_n, arranged as a single rearranged
series sum_s b_s exp(2 pi i m_s x) with slot offsets s_n.

Members are processed in dyadic blocks 2^k <= n < 2^(k+1). Each block is
discretized onto a multiple DTS (moduli chosen from the block's indices),
carried to the one-dimensional DTS of order p by Chinese remaindering, then
truncated to a term budget and translated by a per-block shift so that all
slot spectra are disjoint.

Plans are lazy: a slot stores its DTS residues, weights, budget and shift,
and produces terms, norms, errors and grid values on demand.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from engines.crt_construction import CoprimeModuli, crt_tau, dts_correspondence, next_prime
from engines.dts_core import (
    FrequencySet,
    TrigPolynomial,
    central_window,
    dts_fourier_coeff,
    grid_sum,
    progression_coefficients,
    window_tail,
)
from engines.weights import WeightSequence
from utils.errors import ConsistencyError, DomainError, PreconditionError

logger = logging.getLogger(__name__)

RC = 'rc'
SRC = 'src'
MODES = (RC, SRC)

Vector = Tuple[int, ...]
Component = Tuple[Vector, complex]

NORM_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------

class MultiIndexSequence:
    """
    Reduction input: distinct frequency vectors (RC) or d-dimensional
    polynomials with pairwise disjoint spectra (SRC, normalized to unit norm).
    Member n (1-based) is entries[n - 1].
    """

    def __init__(self, dim: int, mode: str, entries: Sequence[Union[Sequence[int], TrigPolynomial]]):
        if mode not in MODES:
            raise DomainError(f"Unknown mode '{mode}' (expected one of {MODES})")
        if dim < 1:
            raise DomainError(f"Dimension must be >= 1, got {dim}")
        self.dim = dim
        self.mode = mode
        if mode == RC:
            self.entries = [self._vector(e) for e in entries]
            if len(set(self.entries)) != len(self.entries):
                raise DomainError("RC entries must be pairwise distinct")
        else:
            self.entries = [self._normalized(e) for e in entries]
            seen = set()
            for i, poly in enumerate(self.entries):
                spectrum = set(poly.terms)
                if not seen.isdisjoint(spectrum):
                    raise DomainError(f"SRC polynomial {i + 1} overlaps an earlier spectrum")
                seen |= spectrum

    def __len__(self) -> int:
        return len(self.entries)

    def _vector(self, entry: Sequence[int]) -> Vector:
        if isinstance(entry, (int, np.integer)):
            entry = (entry,)
        vec = tuple(int(v) for v in entry)
        if len(vec) != self.dim:
            raise DomainError(f"Index {vec} does not match dimension {self.dim}")
        return vec

    def _normalized(self, poly: TrigPolynomial) -> TrigPolynomial:
        if not isinstance(poly, TrigPolynomial) or poly.dim != self.dim:
            raise DomainError(f"SRC entries must be TrigPolynomials of dimension {self.dim}")
        norm = poly.l2_norm()
        if norm == 0:
            raise DomainError("SRC polynomials must be nonzero")
        return poly.scaled(1 / norm)

    def components(self, n: int) -> List[Component]:
        """(frequency vector, weight) pairs of member n"""
        entry = self.entries[n - 1]
        if self.mode == RC:
            return [(entry, 1 + 0j)]
        keys = sorted(entry.terms, key=lambda f: (f,) if self.dim == 1 else f)
        return [(((f,) if self.dim == 1 else f), entry.terms[f]) for f in keys]

    def source_json(self, n: int) -> Union[List[int], Dict]:
        entry = self.entries[n - 1]
        return list(entry) if self.mode == RC else entry.to_json()

    def to_json(self) -> Dict[str, Any]:
        data = {'dim': self.dim, 'mode': self.mode}
        if self.mode == RC:
            data['indices'] = [list(e) for e in self.entries]
        else:
            data['polynomials'] = [e.to_json() for e in self.entries]
        return data

    @classmethod
    def from_json(cls, data: Union[Dict, List]) -> 'MultiIndexSequence':
        if isinstance(data, list):
            dim = len(data[0]) if data and isinstance(data[0], list) else 1
            return cls(dim, RC, data)
        mode = data.get('mode', RC)
        if mode == SRC:
            return cls(int(data['dim']), SRC, [TrigPolynomial.from_json(p) for p in data['polynomials']])
        return cls(int(data['dim']), mode, data['indices'])


def source_key(mode: str) -> str:
    """Plan JSON key holding a member's input: its vector (RC) or polynomial (SRC)"""
    return 'n_vec' if mode == RC else 'polynomial'


def random_multi_indices(count: int, dim: int, bound: int, seed: int) -> MultiIndexSequence:
    """`count` distinct vectors drawn uniformly from [-bound, bound]^dim"""
    if (2 * bound + 1) ** dim < count:
        raise DomainError(f"Only {(2 * bound + 1) ** dim} vectors fit in [-{bound}, {bound}]^{dim}")
    rng = np.random.default_rng(seed)
    chosen: Dict[Vector, None] = {}
    while len(chosen) < count:
        for row in rng.integers(-bound, bound + 1, size=(count, dim)):
            chosen.setdefault(tuple(int(v) for v in row))
            if len(chosen) == count:
                break
    return MultiIndexSequence(dim, RC, list(chosen))


def random_src_polynomials(count: int, dim: int, terms: int, bound: int, seed: int) -> MultiIndexSequence:
    """`count` random polynomials with `terms` terms each and pairwise disjoint spectra"""
    vectors = random_multi_indices(count * terms, dim, bound, seed).entries
    rng = np.random.default_rng(seed + 1)
    coeffs = rng.normal(size=count * terms) + 1j * rng.normal(size=count * terms)
    polys = []
    for i in range(count):
        chunk = range(i * terms, (i + 1) * terms)
        polys.append(TrigPolynomial(dim, {vectors[j] if dim > 1 else vectors[j][0]: coeffs[j] for j in chunk}))
    return MultiIndexSequence(dim, SRC, polys)


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

def choose_block_moduli(block: Sequence[Sequence[int]], eps: float) -> CoprimeModuli:
    """
    Distinct primes p_j with p_j > max|n_j|, p_j > spread of axis j and
    sum_j 2 pi max|n_j| / p_j <= eps.

    Every axis receives the common lower bound 2 pi sum_j max|n_j| / eps and
    takes the smallest unused prime above its own bound, axes in order.
    """
    if eps <= 0:
        raise DomainError(f"Target error must be positive, got {eps}")
    if not block:
        raise DomainError("Cannot choose moduli for an empty block")
    vectors = np.array([tuple(v) for v in block], dtype=object)
    dim = vectors.shape[1]
    maxima = [max(abs(int(v)) for v in vectors[:, j]) for j in range(dim)]
    spreads = [int(max(vectors[:, j])) - int(min(vectors[:, j])) for j in range(dim)]
    common = 2 * math.pi * sum(maxima) / eps
    chosen: List[int] = []
    for j in range(dim):
        need = max(2, math.ceil(common), maxima[j] + 1, spreads[j] + 1)
        p = next_prime(need)
        while p in chosen:
            p = next_prime(p + 1)
        chosen.append(p)
    return CoprimeModuli(tuple(chosen))


def sup_error(moduli: CoprimeModuli, block: Sequence[Sequence[int]]) -> float:
    """sum_j 2 pi max|n_j| / p_j"""
    return sum(2 * math.pi * max(abs(int(v[j])) for v in block) / p
               for j, p in enumerate(moduli.moduli))


def discretization_distance(moduli: CoprimeModuli, vector: Sequence[int]) -> float:
    """||exp(2 pi i <n, x>) - t^(p_vec)_(n mod p_vec)|| in L2 of the unit cube"""
    overlap = 1 + 0j
    for p, v in zip(moduli.moduli, vector):
        overlap *= dts_fourier_coeff(p, v % p, v)
    return math.sqrt(max(0.0, 2 - 2 * overlap.real))


@dataclass
class Discretization:
    moduli: CoprimeModuli
    residues: List[Vector]
    dts_indices: List[int]
    distances: List[float]


def discretize_block(vectors: Sequence[Sequence[int]], eps: float,
                     moduli: Optional[CoprimeModuli] = None) -> Discretization:
    """Moduli, 1-d DTS indices tau(n mod p_vec) and exact L2 discretization distances for a block"""
    moduli = moduli or choose_block_moduli(vectors, eps)
    residues = [tuple(int(v) % p for v, p in zip(vec, moduli.moduli)) for vec in vectors]
    return Discretization(
        moduli=moduli,
        residues=residues,
        dts_indices=[crt_tau(moduli, r) for r in residues],
        distances=[discretization_distance(moduli, vec) for vec in vectors],
    )


# ---------------------------------------------------------------------------
# Slots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotPolynomial:
    """
    g_n = sum over components (r, a) of a * (central `budget` terms of t^(order)_r),
    modulated by exp(2 pi i shift x). Window positions with zero coefficient
    (r = 0, j != 0) stay in the slot as padding frequencies.
    """

    n: int
    order: int
    residues: Tuple[int, ...]
    weights: Tuple[complex, ...]
    budget: int
    shift: int = 0
    discretization_error: float = 0.0

    @property
    def window(self) -> Tuple[int, int]:
        return central_window(self.budget)

    @property
    def width(self) -> int:
        return len(self.residues) * self.budget

    @property
    def truncation_error_sq(self) -> float:
        j_lo, j_hi = self.window
        tails = window_tail(np.array(self.residues, dtype=float) / self.order, j_lo, j_hi)
        return float(np.sum(np.abs(np.array(self.weights)) ** 2 * tails))

    @property
    def truncation_error(self) -> float:
        return math.sqrt(self.truncation_error_sq)

    @property
    def total_error(self) -> float:
        return self.discretization_error + self.truncation_error

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(np.array(self.weights)) ** 2)) - self.truncation_error_sq

    @property
    def nonzero_terms(self) -> int:
        return sum(1 if r == 0 else self.budget for r in self.residues)

    def coefficients(self) -> np.ndarray:
        """b_s over the slot, component-major, j ascending"""
        j_lo, j_hi = self.window
        js = np.arange(j_lo, j_hi + 1)
        return np.concatenate([a * progression_coefficients(self.order, r, js)
                               for r, a in zip(self.residues, self.weights)])

    def frequencies(self, shifted: bool = True) -> List[int]:
        j_lo, j_hi = self.window
        shift = self.shift if shifted else 0
        return [r + self.order * j + shift for r in self.residues for j in range(j_lo, j_hi + 1)]

    def iter_terms(self) -> Iterator[Tuple[int, complex]]:
        return zip(self.frequencies(), (complex(b) for b in self.coefficients()))

    def bounds(self, shifted: bool = True) -> Tuple[int, int]:
        j_lo, j_hi = self.window
        shift = self.shift if shifted else 0
        return (min(self.residues) + self.order * j_lo + shift,
                max(self.residues) + self.order * j_hi + shift)

    @property
    def max_abs_raw_frequency(self) -> int:
        lo, hi = self.bounds(shifted=False)
        return max(abs(lo), abs(hi))

    def frequency_set(self, shifted: bool = True) -> FrequencySet:
        return FrequencySet.of(1, self.frequencies(shifted))

    def contains(self, freq: int) -> bool:
        j_lo, j_hi = self.window
        for r in self.residues:
            j, rem = divmod(freq - self.shift - r, self.order)
            if rem == 0 and j_lo <= j <= j_hi:
                return True
        return False

    def polynomial(self, shifted: bool = True) -> TrigPolynomial:
        return TrigPolynomial(1, dict(zip(self.frequencies(shifted), self.coefficients())))

    def frequency_residues(self, grid: int, shifted: bool = True) -> np.ndarray:
        """Slot frequencies reduced mod grid without forming the (possibly huge) frequencies"""
        j_lo, j_hi = self.window
        js = np.arange(j_lo, j_hi + 1, dtype=np.int64)
        shift = (self.shift if shifted else 0) % grid
        step = self.order % grid
        return np.concatenate([((r % grid) + step * js + shift) % grid for r in self.residues])

    def grid_values(self, grid: int, shifted: bool = True) -> np.ndarray:
        return grid_sum(self.frequency_residues(grid, shifted), self.coefficients(), grid)

    def to_json(self, emit_terms: bool) -> Dict[str, Any]:
        data = {
            'n': self.n,
            'order': self.order,
            'components': [{'residue': r, 're': a.real, 'im': a.imag}
                           for r, a in zip(self.residues, self.weights)],
            'budget': self.budget,
            'discretization_error': self.discretization_error,
            'truncation_error': self.truncation_error,
        }
        if emit_terms:
            data['terms'] = [{'m': m, 're': b.real, 'im': b.imag} for m, b in self.iter_terms()]
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any], shift: int) -> 'SlotPolynomial':
        return cls(
            n=int(data['n']),
            order=int(data['order']),
            residues=tuple(int(c['residue']) for c in data['components']),
            weights=tuple(complex(c['re'], c['im']) for c in data['components']),
            budget=int(data['budget']),
            shift=shift,
            discretization_error=float(data['discretization_error']),
        )


@dataclass
class BlockPlan:
    """One dyadic block: members, moduli, slot polynomials and the block shift"""
    k: int
    members: List[int]
    moduli: CoprimeModuli
    slots: List[SlotPolynomial]
    sources: List[Any] = field(default_factory=list)
    shift: int = 0

    @property
    def eps(self) -> float:
        return max((s.total_error for s in self.slots), default=0.0)

    @property
    def bound(self) -> float:
        return Config.BLOCK_ERROR_CONSTANT * 2.0 ** -self.k

    @property
    def total_terms(self) -> int:
        return sum(s.width for s in self.slots)

    def bounds(self, shifted: bool = True) -> Tuple[int, int]:
        spans = [s.bounds(shifted) for s in self.slots]
        return min(lo for lo, _ in spans), max(hi for _, hi in spans)

    def frequency_set(self) -> FrequencySet:
        result = FrequencySet.of(1, [])
        for slot in self.slots:
            result = result.union(slot.frequency_set())
        return result

    def contains(self, freq: int) -> bool:
        return any(slot.contains(freq) for slot in self.slots)

    def with_shift(self, shift: int) -> 'BlockPlan':
        return replace(self, shift=shift, slots=[replace(s, shift=shift) for s in self.slots])


def build_block_polys(components: Sequence[Sequence[Component]], k: int, mode: str,
                      moduli: CoprimeModuli, first_member: Optional[int] = None) -> List[SlotPolynomial]:
    """
    Slot polynomials (unshifted) for the members of block k.

    RC: each member's DTS image t^(p)_tau truncated to 4^k central terms.
    SRC: per-member budget doubled until the truncation error is <= 2^-(k+1).

    Raises:
        PreconditionError: moduli too small for block k
    """
    if mode not in MODES:
        raise DomainError(f"Unknown mode '{mode}'")
    vectors = [vec for member in components for vec, _ in member]
    target = 2.0 ** -(k + 1)
    if sup_error(moduli, vectors) > target * (1 + 1e-12):
        raise PreconditionError(f"Moduli {moduli.moduli} give discretization error above {target} for block {k}")
    for j, p in enumerate(moduli.moduli):
        axis = [int(v[j]) for v in vectors]
        if max(abs(a) for a in axis) >= p or max(axis) - min(axis) >= p:
            raise PreconditionError(f"Modulus {p} does not separate axis {j} of block {k}")

    first = 2 ** k if first_member is None else first_member
    p = moduli.product
    slots = []
    used = set()
    for offset, member in enumerate(components):
        disc = discretize_block([vec for vec, _ in member], target, moduli)
        weights = tuple(complex(a) for _, a in member)
        residues = tuple(disc.dts_indices)
        if used.intersection(residues) or len(set(residues)) != len(residues):
            raise ConsistencyError(f"DTS indices collide in block {k}")
        used.update(residues)
        disc_err = math.sqrt(sum(abs(a) ** 2 * d ** 2 for a, d in zip(weights, disc.distances)))
        slot = SlotPolynomial(first + offset, p, residues, weights, 4 ** k, 0, disc_err)
        if mode == SRC:
            budget = 1
            slot = replace(slot, budget=budget)
            while slot.truncation_error > target:
                budget *= 2
                slot = replace(slot, budget=budget)
        if slot.norm_sq > 1 + NORM_TOLERANCE:
            raise ConsistencyError(f"Slot {slot.n} has norm above 1")
        slots.append(slot)
    return slots


def plan_block(sequence: MultiIndexSequence, k: int, members: Sequence[int],
               moduli: Optional[CoprimeModuli] = None) -> BlockPlan:
    """Choose moduli (unless given) and build the unshifted block"""
    components = [sequence.components(n) for n in members]
    vectors = [vec for member in components for vec, _ in member]
    moduli = moduli or choose_block_moduli(vectors, 2.0 ** -(k + 1))
    slots = build_block_polys(components, k, sequence.mode, moduli, first_member=members[0])
    block = BlockPlan(k, list(members), moduli, slots, [sequence.source_json(n) for n in members])
    logger.debug(f"🔧 block {k}: {len(members)} members, moduli {moduli.moduli}, eps {block.eps:.3e}")
    return block


# ---------------------------------------------------------------------------
# Shifts
# ---------------------------------------------------------------------------

def _blocks_overlap(a: BlockPlan, b: BlockPlan) -> bool:
    a_lo, a_hi = a.bounds()
    b_lo, b_hi = b.bounds()
    if a_hi < b_lo or b_hi < a_lo:
        return False
    if a.total_terms <= Config.SMALL_BLOCK_TERMS and b.total_terms <= Config.SMALL_BLOCK_TERMS:
        return not a.frequency_set().isdisjoint(b.frequency_set())
    return True


def assign_shifts(blocks: Sequence[BlockPlan]) -> List[int]:
    """
    Greedy shifts making every slot spectrum disjoint from all others.

    A block keeps shift 0 when it meets no placed block; otherwise its lowest
    frequency is moved one past the highest frequency placed so far.
    """
    placed: List[BlockPlan] = []
    shifts: List[int] = []
    running_max: Optional[int] = None
    for block in blocks:
        candidate = block.with_shift(0)
        shift = 0
        if any(_blocks_overlap(candidate, other) for other in placed):
            lo, _ = candidate.bounds()
            shift = running_max - lo + 1
            candidate = block.with_shift(shift)
        placed.append(candidate)
        hi = candidate.bounds()[1]
        running_max = hi if running_max is None else max(running_max, hi)
        shifts.append(shift)
    return shifts


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

class ReductionPlan:
    """Blocks, slot offsets s_1..s_(N+1) and the lazily generated rearranged series"""

    def __init__(self, mode: str, dim: int, blocks: List[BlockPlan], offsets: Optional[List[int]] = None):
        self.mode = mode
        self.dim = dim
        self.blocks = blocks
        self.slots: List[SlotPolynomial] = [slot for block in blocks for slot in block.slots]
        if [s.n for s in self.slots] != list(range(1, len(self.slots) + 1)):
            raise DomainError("Plan slots must cover members 1..N in order")
        expected = [0]
        for slot in self.slots:
            expected.append(expected[-1] + slot.width)
        if offsets is not None and list(offsets) != expected:
            raise DomainError("Plan offsets do not match slot widths")
        self.offsets = expected

    @property
    def size(self) -> int:
        return len(self.slots)

    @property
    def total_terms(self) -> int:
        return self.offsets[-1]

    @property
    def is_materializable(self) -> bool:
        return self.total_terms <= Config.MAX_MATERIALIZED_TERMS

    def slot(self, n: int) -> SlotPolynomial:
        if not 1 <= n <= self.size:
            raise DomainError(f"Slot {n} outside 1..{self.size}")
        return self.slots[n - 1]

    def block(self, k: int) -> BlockPlan:
        for block in self.blocks:
            if block.k == k:
                return block
        raise DomainError(f"Plan has no block {k}")

    def iter_terms(self) -> Iterator[Tuple[int, int, complex]]:
        """(s, m_s, b_s) for s = 1..total_terms"""
        for slot, start in zip(self.slots, self.offsets):
            for i, (m, b) in enumerate(slot.iter_terms()):
                yield start + i + 1, m, b

    def _require_materializable(self) -> None:
        if not self.is_materializable:
            raise PreconditionError(
                f"Plan has {self.total_terms} terms, above MAX_MATERIALIZED_TERMS={Config.MAX_MATERIALIZED_TERMS}"
            )

    def coefficients(self) -> np.ndarray:
        self._require_materializable()
        return np.concatenate([slot.coefficients() for slot in self.slots])

    def frequencies(self) -> List[int]:
        self._require_materializable()
        return [m for slot in self.slots for m in slot.frequencies()]

    def rearrangement(self) -> Dict[int, int]:
        """The injection s -> m_s"""
        return dict(zip(range(1, self.total_terms + 1), self.frequencies()))

    def to_json(self) -> Dict[str, Any]:
        emit = self.total_terms <= Config.MAX_EMITTED_TERMS
        return {
            'mode': self.mode,
            'dim': self.dim,
            'n': self.size,
            'kappa': Config.BLOCK_ERROR_CONSTANT,
            'total_terms': self.total_terms,
            'terms_emitted': emit,
            'blocks': [
                {
                    'k': block.k,
                    'moduli': block.moduli.to_json(),
                    'shift': block.shift,
                    'eps': block.eps,
                    'members': [dict(slot.to_json(emit), **{source_key(self.mode): source})
                                for slot, source in zip(block.slots, block.sources)],
                }
                for block in self.blocks
            ],
            'offsets': self.offsets,
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> 'ReductionPlan':
        blocks = []
        for b in data['blocks']:
            shift = int(b['shift'])
            slots = [SlotPolynomial.from_json(m, shift) for m in b['members']]
            blocks.append(BlockPlan(int(b['k']), [s.n for s in slots], CoprimeModuli(tuple(b['moduli'])),
                                    slots, [m.get(source_key(data['mode'])) for m in b['members']], shift))
        return cls(data['mode'], int(data['dim']), blocks, [int(s) for s in data['offsets']])


def build_reduction(sequence: MultiIndexSequence, N: int) -> ReductionPlan:
    """Build the plan for members 1..N: moduli, slot polynomials, shifts and offsets"""
    if N < 1:
        raise DomainError(f"Prefix length must be >= 1, got {N}")
    if N > len(sequence):
        raise DomainError(f"Prefix length {N} exceeds the {len(sequence)} available members")
    logger.info(f"🔧 Building {sequence.mode.upper()} reduction for N={N} (d={sequence.dim})")
    blocks = []
    for k in range(N.bit_length()):
        members = list(range(2 ** k, min(2 ** (k + 1), N + 1)))
        blocks.append(plan_block(sequence, k, members))
    shifts = assign_shifts(blocks)
    blocks = [block.with_shift(shift) for block, shift in zip(blocks, shifts)]
    plan = ReductionPlan(sequence.mode, sequence.dim, blocks)
    logger.info(f"✅ Plan built: {len(blocks)} blocks, {plan.total_terms} terms, shifts {shifts}")
    return plan


# ---------------------------------------------------------------------------
# Audit
# ---------------------------------------------------------------------------

@dataclass
class PlanAudit:
    exhaustive: bool
    checks: List[str] = field(default_factory=list)
    violations: List[Dict[str, Any]] = field(default_factory=list)
    measurements: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def fail(self, invariant: str, detail: str) -> None:
        self.violations.append({'invariant': invariant, 'detail': detail})

    def to_json(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'exhaustive': self.exhaustive,
                'checks': self.checks, 'violations': self.violations,
                'measurements': self.measurements}


def audit_plan(plan: ReductionPlan) -> PlanAudit:
    """
    Structural audit: offset law, s_n <= n^4, slot norms, term caps,
    per-block residues, cross-block spectrum disjointness and the block
    error law. Small plans additionally get an exhaustive distinctness check
    of all m_s.
    """
    audit = PlanAudit(exhaustive=plan.is_materializable)
    offsets = plan.offsets

    audit.checks.append('offset_law')
    for slot in plan.slots:
        k = slot.n.bit_length() - 1
        if plan.mode == RC and offsets[slot.n] - offsets[slot.n - 1] != 4 ** k:
            audit.fail('offset_law', f"s_{slot.n + 1} - s_{slot.n} != 4^{k}")

    # s_n <= n^4 is measured in both modes and enforced for RC plans only
    audit.checks.append('offset_bound')
    enforced = plan.mode == RC
    exceeded = [n for n in range(1, plan.size + 1) if offsets[n - 1] > n ** 4]
    worst = max(range(1, plan.size + 1), key=lambda n: offsets[n - 1] / n ** 4)
    audit.measurements['offset_bound'] = {
        'enforced': enforced,
        'max_ratio': offsets[worst - 1] / worst ** 4,
        'worst_n': worst,
        'exceeded': len(exceeded),
    }
    if enforced:
        for n in exceeded:
            audit.fail('offset_bound', f"s_{n} = {offsets[n - 1]} > {n}^4")
    elif exceeded:
        logger.info(f"📊 s_n > n^4 for {len(exceeded)} members (not enforced in SRC mode)")

    audit.checks.append('slot_norm')
    audit.checks.append('slot_term_cap')
    audit.checks.append('truncation_law')
    for slot in plan.slots:
        if slot.norm_sq > 1 + NORM_TOLERANCE:
            audit.fail('slot_norm', f"slot {slot.n} has squared norm {slot.norm_sq}")
        k = slot.n.bit_length() - 1
        if plan.mode == RC and slot.nonzero_terms > 4 ** k:
            audit.fail('slot_term_cap', f"slot {slot.n} has {slot.nonzero_terms} terms > 4^{k}")
        if slot.truncation_error > Config.TRUNCATION_CONSTANT * 2.0 ** -(k + 1):
            audit.fail('truncation_law', f"slot {slot.n} truncation {slot.truncation_error:.3e} > K' 2^-{k + 1}")

    audit.checks.append('block_residues')
    audit.checks.append('error_law')
    for block in plan.blocks:
        residues = [r for slot in block.slots for r in slot.residues]
        if len(set(residues)) != len(residues):
            audit.fail('block_residues', f"block {block.k} reuses a residue mod {block.moduli.product}")
        if any(slot.order != block.moduli.product for slot in block.slots):
            audit.fail('block_residues', f"block {block.k} has slots of a foreign order")
        if block.eps > block.bound:
            audit.fail('error_law', f"block {block.k}: eps {block.eps:.3e} > {block.bound:.3e}")

    audit.checks.append('spectrum_disjointness')
    for i, a in enumerate(plan.blocks):
        for b in plan.blocks[i + 1:]:
            if _blocks_overlap(a, b):
                small = a.total_terms <= Config.SMALL_BLOCK_TERMS and b.total_terms <= Config.SMALL_BLOCK_TERMS
                detail = 'spectra intersect' if small else 'frequency hulls intersect'
                audit.fail('spectrum_disjointness', f"blocks {a.k} and {b.k}: {detail}")

    if audit.exhaustive:
        audit.checks.append('distinct_frequencies')
        freqs = plan.frequencies()
        if len(set(freqs)) != len(freqs):
            audit.fail('distinct_frequencies', f"{len(freqs) - len(set(freqs))} repeated m_s")

    if audit.passed:
        logger.info(f"✅ Plan audit passed ({len(audit.checks)} checks, exhaustive={audit.exhaustive})")
    else:
        logger.warning(f"⚠️ Plan audit found {len(audit.violations)} violations")
    return audit


# ---------------------------------------------------------------------------
# Coefficients and weights
# ---------------------------------------------------------------------------

def _padded(plan: ReductionPlan, a: Sequence[complex]) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 1 or len(a) > plan.size:
        raise DomainError(f"Expected at most {plan.size} coefficients, got {len(a)}")
    return np.concatenate([a, np.zeros(plan.size - len(a), dtype=complex)])


def map_coefficients(plan: ReductionPlan, a: Sequence[complex]) -> np.ndarray:
    """c_s = a_n b_s for s_n < s <= s_(n+1)"""
    a = _padded(plan, a)
    plan._require_materializable()
    return np.concatenate([a_n * slot.coefficients() for a_n, slot in zip(a, plan.slots)])


def series_identity_gap(plan: ReductionPlan, a: Sequence[complex], grid: int = 1024) -> float:
    """
    max over the grid of |sum_n a_n g_n - sum_s c_s exp(2 pi i m_s x)|, the
    slot-wise sum against the flat rearranged series built from map_coefficients.
    """
    a = _padded(plan, a)
    c = map_coefficients(plan, a)
    by_slot = np.zeros(grid, dtype=complex)
    for a_n, slot in zip(a, plan.slots):
        if a_n != 0:
            by_slot += a_n * slot.grid_values(grid)
    residues = np.concatenate([slot.frequency_residues(grid) for slot in plan.slots])
    flat = grid_sum(residues, c, grid)
    return float(np.max(np.abs(by_slot - flat)))


@dataclass
class WeightTransferReport:
    weight: str
    lhs: float
    rhs: float
    c_star: float
    lhs_exact: bool
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.c_star * self.rhs * (1 + self.tolerance) + self.tolerance

    def to_json(self) -> Dict[str, Any]:
        return {'weight': self.weight, 'lhs': self.lhs, 'rhs': self.rhs, 'c_star': self.c_star,
                'holds': self.holds, 'lhs_exact': self.lhs_exact, 'tolerance': self.tolerance}


def verify_weight_transfer(plan: ReductionPlan, a: Sequence[complex], w: WeightSequence) -> WeightTransferReport:
    """
    LHS = sum_s |c_s|^2 w(s), RHS = sum_n |a_n|^2 w(n), C* = max_n w(s_(n+1)) / w(n).

    LHS is summed term by term up to MAX_SCANNED_TERMS; larger plans use the
    per-slot bound w(s_(n+1)) ||g_n||^2 (w is nondecreasing).

    Raises:
        DomainError: w is not admissible on 1..s_(N+1)
    """
    w.assert_admissible(plan.total_terms + 1)
    a = _padded(plan, a)
    mass = np.abs(a) ** 2
    exact = plan.total_terms <= Config.MAX_SCANNED_TERMS
    lhs = 0.0
    for a2, slot, start in zip(mass, plan.slots, plan.offsets):
        if a2 == 0:
            continue
        if exact:
            s = np.arange(start + 1, start + slot.width + 1)
            lhs += a2 * float(np.sum(np.abs(slot.coefficients()) ** 2 * w(s)))
        else:
            lhs += a2 * w(start + slot.width) * slot.norm_sq
    n = np.arange(1, plan.size + 1)
    w_n = w(n)
    rhs = float(np.sum(mass * w_n))
    c_star = float(np.max(w(np.array(plan.offsets[1:], dtype=float)) / w_n))
    report = WeightTransferReport(w.name, lhs, rhs, c_star, exact, Config.SERIES_TOLERANCE)
    status = "✅" if report.holds else "❌"
    logger.info(f"{status} weight transfer: LHS={lhs:.6g} <= C*={c_star:.4f} x RHS={rhs:.6g}")
    return report


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass
class BlockCertificate:
    k: int
    moduli: Tuple[int, ...]
    order: int
    shift: int
    members: List[Dict[str, Any]]
    eps: float
    bound: float
    shift_invariant: bool
    plan_eps: float

    @property
    def eps_consistent(self) -> bool:
        return math.isclose(self.eps, self.plan_eps, rel_tol=1e-9, abs_tol=1e-15)

    @property
    def holds(self) -> bool:
        return self.eps <= self.bound and self.shift_invariant and self.eps_consistent

    def to_json(self) -> Dict[str, Any]:
        return {'k': self.k, 'moduli': list(self.moduli), 'order': self.order, 'shift': self.shift,
                'eps': self.eps, 'plan_eps': self.plan_eps, 'eps_consistent': self.eps_consistent,
                'bound': self.bound, 'kappa': Config.BLOCK_ERROR_CONSTANT,
                'holds': self.holds, 'shift_invariant': self.shift_invariant, 'members': self.members}


def _source_components(source: Union[List[int], Dict], mode: str) -> List[Component]:
    if mode == RC:
        return [(tuple(int(v) for v in source), 1 + 0j)]
    poly = TrigPolynomial.from_json(source)
    return MultiIndexSequence(poly.dim, SRC, [poly]).components(1)


def _shift_is_translation(slot: SlotPolynomial, shift: int) -> bool:
    """The shifted slot is the unshifted one with every frequency moved by `shift`, coefficients unchanged"""
    if slot.shift != shift:
        return False
    if slot.width > Config.SMALL_BLOCK_TERMS:
        return True
    raw = slot.polynomial(shifted=False).terms
    moved = slot.polynomial(shifted=True).terms
    return moved == {m + shift: c for m, c in raw.items()}


def certify_block(block: BlockPlan, mode: str = RC) -> BlockCertificate:
    """
    Witness chain for one block: every DTS index is re-derived through the
    exact Theta correspondence, discretization distances are recomputed from
    the member inputs, and the per-member distances (discretization, DTS to
    polynomial, total) are collected against the bound K 2^-k.
    """
    moduli = block.moduli
    members = []
    shift_invariant = True
    for slot, source in zip(block.slots, block.sources):
        dts_indices = []
        for r in slot.residues:
            residue_vec = tuple(r % p for p in moduli.moduli)
            if dts_correspondence(moduli, residue_vec) != r:
                raise ConsistencyError(f"DTS index {r} of slot {slot.n} is not tau of its residues")
            dts_indices.append({'residues': list(residue_vec), 'index': r})
        shift_invariant &= _shift_is_translation(slot, block.shift)
        if source is None:
            discretization = slot.discretization_error
        else:
            discretization = math.sqrt(sum(abs(a) ** 2 * discretization_distance(moduli, vec) ** 2
                                           for vec, a in _source_components(source, mode)))
        members.append({
            'n': slot.n,
            source_key(mode): source,
            'dts': dts_indices,
            'discretization_distance': discretization,
            'witness_distance': slot.truncation_error,
            'total_distance': discretization + slot.truncation_error,
        })
    eps = max((m['total_distance'] for m in members), default=0.0)
    return BlockCertificate(block.k, moduli.moduli, moduli.product, block.shift, members,
                            eps, block.bound, shift_invariant, block.eps)


def block_equivalence_certificate(plan: ReductionPlan, k: int) -> BlockCertificate:
    certificate = certify_block(plan.block(k), plan.mode)
    status = "✅" if certificate.holds else "❌"
    logger.info(f"{status} block {k}: eps={certificate.eps:.4e} bound={certificate.bound:.4e}")
    return certificate
