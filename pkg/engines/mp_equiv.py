"""
Measure-Preserving Cell Maps and Probabilistic Equivalence

Everything lives on finite uniform partitions of the unit cube, so measures
are exact rationals and equality of joint distributions is decided by exact
multiset comparison of value tuples.
"""

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from engines.dts_core import DiscreteTrigSystem, RootOfUnity, TrigPolynomial, cell_integral
from utils.errors import DomainError

logger = logging.getLogger(__name__)

Value = Union[RootOfUnity, complex, float, int, Fraction]

EXHAUSTIVE_AXIOM_CELLS = 12

_UNIT_ROOTS = {1 + 0j: RootOfUnity(0, 1), -1 + 0j: RootOfUnity(1, 2),
               1j: RootOfUnity(1, 4), -1j: RootOfUnity(3, 4)}


def canonical_value(value: Value) -> Value:
    """Canonical hashable form: fourth roots of unity become RootOfUnity, real values drop their imaginary part"""
    if isinstance(value, RootOfUnity):
        return value
    if isinstance(value, Fraction):
        return value if value.denominator != 1 else _canonical_number(complex(value))
    return _canonical_number(complex(value))


def _canonical_number(c: complex) -> Value:
    if c in _UNIT_ROOTS:
        return _UNIT_ROOTS[c]
    if c.imag == 0:
        real = c.real
        return int(real) if real.is_integer() else real
    return c


def _as_complex(value: Value) -> complex:
    return value.to_complex() if isinstance(value, RootOfUnity) else complex(value)


def value_to_json(value: Value) -> Dict:
    value = canonical_value(value)
    if isinstance(value, RootOfUnity):
        return value.to_json()
    c = complex(value)
    return {'re': c.real, 'im': c.imag}


# ---------------------------------------------------------------------------
# Partitions and step functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellPartition:
    """Uniform partition of the unit cube into q_1 x ... x q_d half-open boxes"""

    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(q) for q in self.counts)
        if not counts or any(q < 1 for q in counts):
            raise DomainError(f"Cell counts must be positive, got {counts}")
        object.__setattr__(self, 'counts', counts)

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    @property
    def cell_measure(self) -> Fraction:
        return Fraction(1, self.size)

    def cells(self) -> Iterator[Tuple[int, ...]]:
        """Per-axis cell indices in row-major (flat index) order"""
        return itertools.product(*(range(q) for q in self.counts))

    def flat_index(self, cell: Sequence[int]) -> int:
        if len(cell) != self.dimension:
            raise DomainError(f"Cell {tuple(cell)} does not match dimension {self.dimension}")
        flat = 0
        for q, u in zip(self.counts, cell):
            if not 0 <= u < q:
                raise DomainError(f"Cell index {u} out of range [0, {q})")
            flat = flat * q + u
        return flat

    def cell_at(self, flat: int) -> Tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise DomainError(f"Flat cell index {flat} out of range [0, {self.size})")
        cell = []
        for q in reversed(self.counts):
            flat, u = divmod(flat, q)
            cell.append(u)
        return tuple(reversed(cell))

    def cell_containing(self, x_vec: Sequence[float]) -> int:
        if len(x_vec) != self.dimension:
            raise DomainError(f"Point of dimension {len(x_vec)} for partition of dimension {self.dimension}")
        return self.flat_index([min(int(math.floor(q * (x % 1))), q - 1)
                                for q, x in zip(self.counts, x_vec)])

    def measure(self, cell_count: int) -> Fraction:
        return Fraction(cell_count, self.size)


class StepFunction:
    """A complex value per cell of a CellPartition"""

    def __init__(self, partition: CellPartition, values: Sequence[Value]):
        values = tuple(values)
        if len(values) != partition.size:
            raise DomainError(f"Expected {partition.size} cell values, got {len(values)}")
        self.partition = partition
        self.values = values

    @classmethod
    def constant(cls, partition: CellPartition, value: Value) -> 'StepFunction':
        return cls(partition, [value] * partition.size)

    @classmethod
    def indicator(cls, partition: CellPartition, cells: Sequence[Sequence[int]]) -> 'StepFunction':
        chosen = {partition.flat_index(c) for c in cells}
        return cls(partition, [1 if i in chosen else 0 for i in range(partition.size)])

    @classmethod
    def from_dts(cls, system: DiscreteTrigSystem, n_vec: Sequence[int]) -> 'StepFunction':
        """The system function t_n as exact root-of-unity cell values"""
        partition = CellPartition(system.orders)
        return cls(partition, [system.value_at_cell(n_vec, cell) for cell in partition.cells()])

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction) or self.partition != other.partition:
            return False
        return all(canonical_value(a) == canonical_value(b) for a, b in zip(self.values, other.values))

    def __repr__(self) -> str:
        return f"StepFunction(counts={self.partition.counts})"

    def __add__(self, other: 'StepFunction') -> 'StepFunction':
        self._check(other)
        return StepFunction(self.partition, [_as_complex(a) + _as_complex(b)
                                             for a, b in zip(self.values, other.values)])

    def __mul__(self, other: 'StepFunction') -> 'StepFunction':
        self._check(other)
        return StepFunction(self.partition, [_multiply(a, b) for a, b in zip(self.values, other.values)])

    def scaled(self, factor: complex) -> 'StepFunction':
        return StepFunction(self.partition, [factor * _as_complex(v) for v in self.values])

    def as_array(self) -> np.ndarray:
        return np.array([_as_complex(v) for v in self.values], dtype=complex)

    def l2_norm_sq(self) -> float:
        return float(np.mean(np.abs(self.as_array()) ** 2))

    def l2_norm(self) -> float:
        return math.sqrt(self.l2_norm_sq())

    def fourier_coeff(self, freq: Union[int, Sequence[int]]) -> complex:
        """Integral of f(x) exp(-2 pi i <m, x>) over the unit cube (separable per axis)"""
        freq = (freq,) if isinstance(freq, (int, np.integer)) else tuple(freq)
        if len(freq) != self.partition.dimension:
            raise DomainError(f"Frequency {freq} does not match dimension {self.partition.dimension}")
        grid = self.as_array().reshape(self.partition.counts)
        for q, m in zip(self.partition.counts, freq):
            phases = np.exp(-2j * np.pi * (m % q) * np.arange(q) / q) * cell_integral(q, m)
            grid = np.tensordot(phases, grid, axes=([0], [0]))
        return complex(grid)

    def refined(self, counts: Sequence[int]) -> np.ndarray:
        """Values on a finer partition whose per-axis counts are multiples of ours"""
        counts = tuple(counts)
        grid = self.as_array().reshape(self.partition.counts)
        for axis, (q, fine) in enumerate(zip(self.partition.counts, counts)):
            if fine % q:
                raise DomainError(f"{fine} cells do not refine {q} cells")
            grid = np.repeat(grid, fine // q, axis=axis)
        return grid.ravel()

    def _check(self, other: 'StepFunction') -> None:
        if self.partition != other.partition:
            raise DomainError("Step functions live on different partitions")


def _multiply(a: Value, b: Value) -> Value:
    if isinstance(a, RootOfUnity) and isinstance(b, RootOfUnity):
        return a * b
    return _as_complex(a) * _as_complex(b)


# ---------------------------------------------------------------------------
# Measure-preserving cell maps
# ---------------------------------------------------------------------------

class MPCellMap:
    """
    Bijection between the cells of two partitions with equal cell counts.

    Pass validate=False to hold an arbitrary (possibly corrupt) cell map,
    which mp_check_axioms can then refute.
    """

    def __init__(self, source: CellPartition, target: CellPartition,
                 mapping: Sequence[int], validate: bool = True):
        mapping = tuple(int(t) for t in mapping)
        if len(mapping) != source.size:
            raise DomainError(f"Map covers {len(mapping)} cells, source has {source.size}")
        if any(not 0 <= t < target.size for t in mapping):
            raise DomainError("Map sends a cell outside the target partition")
        if validate:
            if source.size != target.size:
                raise DomainError(f"Partitions of {source.size} and {target.size} cells have unequal cell measures")
            if len(set(mapping)) != len(mapping):
                raise DomainError("Cell map is not injective")
        self.source = source
        self.target = target
        self.mapping = mapping

    @classmethod
    def identity(cls, partition: CellPartition) -> 'MPCellMap':
        return cls(partition, partition, range(partition.size))

    @property
    def is_bijective(self) -> bool:
        return self.source.size == self.target.size and len(set(self.mapping)) == len(self.mapping)

    def inverse(self) -> 'MPCellMap':
        if not self.is_bijective:
            raise DomainError("Only bijective cell maps can be inverted")
        inverse = [0] * self.target.size
        for s, t in enumerate(self.mapping):
            inverse[t] = s
        return MPCellMap(self.target, self.source, inverse)

    def compose(self, after: 'MPCellMap') -> 'MPCellMap':
        """`after` applied to the image of this map"""
        if after.source != self.target:
            raise DomainError("Cannot compose maps over different partitions")
        return MPCellMap(self.source, after.target, [after.mapping[t] for t in self.mapping])

    def image(self, cells: Sequence[int]) -> set:
        return {self.mapping[c] for c in cells}

    def to_json(self) -> List[Dict]:
        return [{'from': list(self.source.cell_at(s)),
                 'to': t if self.target.dimension == 1 else list(self.target.cell_at(t))}
                for s, t in enumerate(self.mapping)]


def mp_apply(mp_map: MPCellMap, f: StepFunction) -> StepFunction:
    """Transport f to the target partition: the value on cell c moves to cell map(c)"""
    if f.partition != mp_map.source:
        raise DomainError(f"Function lives on {f.partition.counts}, map source is {mp_map.source.counts}")
    values: List[Value] = [0] * mp_map.target.size
    for cell, value in zip(mp_map.mapping, f.values):
        values[cell] = value
    return StepFunction(mp_map.target, values)


# ---------------------------------------------------------------------------
# Axiom checks
# ---------------------------------------------------------------------------

AXIOMS = ('measure', 'union', 'finite_union', 'difference', 'intersection')


@dataclass
class AxiomReport:
    """Outcome of mp_check_axioms; failures carry witness cell sets"""
    exhaustive: bool
    checked_pairs: int
    bijective: bool
    failures: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.bijective and not self.failures

    def to_json(self) -> Dict[str, Any]:
        return {'passed': self.passed, 'exhaustive': self.exhaustive,
                'checked_pairs': self.checked_pairs, 'bijective': self.bijective,
                'failures': self.failures}


def mp_check_axioms(mp_map: MPCellMap, trials: int = 256, seed: Optional[int] = None) -> AxiomReport:
    """
    Check the MP-map identities on unions of source cells.

    Sources with at most EXHAUSTIVE_AXIOM_CELLS cells are checked over every
    pair of cell unions; larger ones over `trials` seeded random pairs.
    """
    q_source, q_target = mp_map.source.size, mp_map.target.size
    if max(q_source, q_target) <= EXHAUSTIVE_AXIOM_CELLS:
        failures, pairs = _exhaustive_axioms(mp_map)
        exhaustive = True
    else:
        failures, pairs = _sampled_axioms(mp_map, trials, Config.DEFAULT_SEED if seed is None else seed)
        exhaustive = False
    if mp_map.is_bijective:
        failures.extend(_inverse_failures(mp_map))
    report = AxiomReport(exhaustive, pairs, mp_map.is_bijective, failures)
    if report.passed:
        logger.info(f"✅ MP axioms hold on {pairs} pairs ({q_source} -> {q_target} cells)")
    else:
        logger.warning(f"⚠️ MP axioms failed: {sorted({f['identity'] for f in failures})}")
    return report


def _inverse_failures(mp_map: MPCellMap) -> List[Dict]:
    """The map followed by its inverse fixes every source cell"""
    round_trip = mp_map.compose(mp_map.inverse())
    moved = [c for c, t in enumerate(round_trip.mapping) if c != t]
    if not moved:
        return []
    return [{'identity': 'inverse', 'cell': moved[0], 'returned_to': round_trip.mapping[moved[0]]}]


def _exhaustive_axioms(mp_map: MPCellMap) -> Tuple[List[Dict], int]:
    q, q_target = mp_map.source.size, mp_map.target.size
    masks = np.arange(1 << q, dtype=np.int64)
    images = np.zeros(1 << q, dtype=np.int64)
    for c, t in enumerate(mp_map.mapping):
        images |= np.where((masks >> c) & 1, np.int64(1) << t, 0)
    bits = max(q_target, q)
    popcount = np.zeros(1 << bits, dtype=np.int64)
    for bit in range(bits):
        popcount += (np.arange(1 << bits, dtype=np.int64) >> bit) & 1
    full = (1 << q) - 1

    found: Dict[str, Dict] = {}
    for e in range(1 << q):
        img_e = images[e]
        rest = full & ~(e | masks)
        checks = {
            'measure': (np.full(1 << q, popcount[e]), np.full(1 << q, popcount[img_e])),
            'union': (popcount[e | masks], popcount[img_e | images]),
            'finite_union': (np.full(1 << q, q), popcount[img_e | images | images[rest]]),
            'difference': (popcount[e & ~masks], popcount[img_e & ~images]),
            'intersection': (popcount[e & masks], popcount[img_e & images]),
        }
        for name, (lhs, rhs) in checks.items():
            if name in found:
                continue
            # mu = lhs / q and nu = rhs / q_target
            bad = np.nonzero(lhs * q_target != rhs * q)[0]
            if len(bad):
                f = int(bad[0])
                found[name] = {
                    'identity': name,
                    'E': [c for c in range(q) if e >> c & 1],
                    'F': [c for c in range(q) if f >> c & 1],
                    'source_measure': str(Fraction(int(lhs[f]), q)),
                    'target_measure': str(Fraction(int(rhs[f]), q_target)),
                }
    return list(found.values()), (1 << q) ** 2


def _sampled_axioms(mp_map: MPCellMap, trials: int, seed: int) -> Tuple[List[Dict], int]:
    rng = np.random.default_rng(seed)
    q, q_target = mp_map.source.size, mp_map.target.size
    mapping = np.array(mp_map.mapping)

    def image(mask: np.ndarray) -> np.ndarray:
        out = np.zeros(q_target, dtype=bool)
        out[mapping[mask]] = True
        return out

    found: Dict[str, Dict] = {}
    for _ in range(trials):
        e, f, g = (rng.random(q) < 0.5 for _ in range(3))
        ie, i_f, ig = image(e), image(f), image(g)
        checks = {
            'measure': (e.sum(), ie.sum()),
            'union': ((e | f).sum(), (ie | i_f).sum()),
            'finite_union': ((e | f | g).sum(), (ie | i_f | ig).sum()),
            'difference': ((e & ~f).sum(), (ie & ~i_f).sum()),
            'intersection': ((e & f).sum(), (ie & i_f).sum()),
        }
        for name, (lhs, rhs) in checks.items():
            if name not in found and Fraction(int(lhs), q) != Fraction(int(rhs), q_target):
                found[name] = {
                    'identity': name,
                    'E': np.nonzero(e)[0].tolist(),
                    'F': np.nonzero(f)[0].tolist(),
                    'source_measure': str(Fraction(int(lhs), q)),
                    'target_measure': str(Fraction(int(rhs), q_target)),
                }
    return list(found.values()), trials


# ---------------------------------------------------------------------------
# Joint distributions
# ---------------------------------------------------------------------------

class JointDistribution:
    """Finite distribution: value tuple -> exact measure"""

    def __init__(self, atoms: Dict[Tuple, Fraction]):
        self.atoms = dict(atoms)

    def __eq__(self, other) -> bool:
        return isinstance(other, JointDistribution) and self.atoms == other.atoms

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, values: Tuple) -> Fraction:
        return self.atoms.get(tuple(canonical_value(v) for v in values), Fraction(0))

    def total_measure(self) -> Fraction:
        return sum(self.atoms.values(), Fraction(0))

    def to_json(self) -> List[Dict]:
        rows = [{'values': [value_to_json(v) for v in values],
                 'measure': {'num': m.numerator, 'den': m.denominator}}
                for values, m in self.atoms.items()]
        return sorted(rows, key=lambda r: repr(r['values']))


def joint_distribution(fs: Sequence[StepFunction]) -> JointDistribution:
    if not fs:
        return JointDistribution({(): Fraction(1)})
    partition = fs[0].partition
    if any(f.partition != partition for f in fs):
        raise DomainError("All functions of a joint distribution must share one partition")
    counts = Counter(tuple(canonical_value(f.values[c]) for f in fs) for c in range(partition.size))
    return JointDistribution({values: partition.measure(n) for values, n in counts.items()})


def verify_prob_equiv(fs: Sequence[StepFunction], gs: Sequence[StepFunction]) -> bool:
    if len(fs) != len(gs):
        raise DomainError(f"Systems have different lengths: {len(fs)} vs {len(gs)}")
    equal = joint_distribution(fs) == joint_distribution(gs)
    logger.debug(f"📊 probabilistic equivalence of {len(fs)} functions: {equal}")
    return equal


# ---------------------------------------------------------------------------
# L2 distances
# ---------------------------------------------------------------------------

L2Object = Union[StepFunction, TrigPolynomial]


def l2_distance(f: L2Object, g: L2Object) -> float:
    """
    L2 distance between step functions and/or trigonometric polynomials.

    Step functions are compared on the per-axis lcm refinement; polynomials
    by Parseval; mixed pairs through the step function's Fourier coefficients
    on the polynomial's spectrum.
    """
    if isinstance(f, StepFunction) and isinstance(g, StepFunction):
        if f.partition.dimension != g.partition.dimension:
            raise DomainError("Step functions of different dimensions")
        counts = [math.lcm(a, b) for a, b in zip(f.partition.counts, g.partition.counts)]
        diff = f.refined(counts) - g.refined(counts)
        return math.sqrt(float(np.mean(np.abs(diff) ** 2)))
    if isinstance(f, TrigPolynomial) and isinstance(g, TrigPolynomial):
        return (f - g).l2_norm()
    if isinstance(f, TrigPolynomial):
        f, g = g, f
    if not isinstance(f, StepFunction) or not isinstance(g, TrigPolynomial):
        raise DomainError(f"Incompatible L2 objects: {type(f).__name__}, {type(g).__name__}")
    if f.partition.dimension != g.dim:
        raise DomainError("Step function and polynomial have different dimensions")
    cross = sum((f.fourier_coeff(m) * c.conjugate() for m, c in g.terms.items()), 0j)
    dist_sq = f.l2_norm_sq() - 2 * cross.real + g.l2_norm_sq()
    return math.sqrt(max(dist_sq, 0.0))


@dataclass
class EpsEquivReport:
    eps: float
    distances: List[float]

    @property
    def passed(self) -> bool:
        return all(d < self.eps for d in self.distances)

    def to_json(self) -> Dict[str, Any]:
        return {'eps': self.eps, 'distances': self.distances,
                'max_distance': max(self.distances, default=0.0), 'passed': self.passed}


def verify_eps_equiv(fs: Sequence[StepFunction], mp_map: MPCellMap,
                     gs: Sequence[L2Object], eps: float) -> EpsEquivReport:
    """fs is eps-equivalent to gs through mp_map when every ||map(f_k) - g_k|| < eps"""
    if len(fs) != len(gs):
        raise DomainError(f"Systems have different lengths: {len(fs)} vs {len(gs)}")
    if eps <= 0:
        raise DomainError(f"Error bound must be positive, got {eps}")
    distances = [l2_distance(mp_apply(mp_map, f), g) for f, g in zip(fs, gs)]
    return EpsEquivReport(eps, distances)
