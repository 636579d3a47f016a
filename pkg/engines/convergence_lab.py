"""
Convergence Lab

Grid probes of dyadic block maxima of partial sums, the delta_k error
bound, Kolmogorov distance between block-maximum distributions of two
systems, and admissibility diagnostics for weight sequences.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import ks_2samp

from config import Config
from engines.crt_construction import CoprimeModuli, crt_tau
from engines.dts_core import TrigPolynomial, root_table
from engines.mp_equiv import L2Object, l2_distance
from engines.reduction import ReductionPlan
from engines.weights import WeightSequence
from utils.errors import DomainError, GridResolutionError

logger = logging.getLogger(__name__)

QUANTILES = (0.5, 0.9, 0.99)


def block_indices(k: int) -> range:
    return range(2 ** k, 2 ** (k + 1))


@lru_cache(maxsize=8)
def grid_axes(grid: int, dim: int) -> np.ndarray:
    """Per-axis integer coordinates of the grid points, shape (dim, grid^dim), row-major"""
    axes = np.indices((grid,) * dim).reshape(dim, -1)
    axes.setflags(write=False)
    return axes


# ---------------------------------------------------------------------------
# System evaluators
# ---------------------------------------------------------------------------

class SystemEvaluator(ABC):
    """Index n (1-based) -> values of phi_n on the uniform grid i/grid (flattened)"""

    name = 'system'
    dim = 1

    @abstractmethod
    def values(self, n: int, grid: int) -> np.ndarray:
        """Grid values of phi_n"""

    @abstractmethod
    def required_resolution(self, indices: Sequence[int]) -> int:
        """Smallest admissible grid for the given indices"""

    def grid_ok(self, indices: Sequence[int], grid: int) -> bool:
        return grid >= self.required_resolution(indices)

    def check_grid(self, indices: Sequence[int], grid: int) -> None:
        if grid < 2:
            raise DomainError(f"Grid must be >= 2, got {grid}")
        if not self.grid_ok(indices, grid):
            raise GridResolutionError(f"Grid {grid} does not resolve {self.name} block",
                                      self.required_resolution(indices))


class TrigSystemEvaluator(SystemEvaluator):
    """exp(2 pi i <v_n, x>) for given frequency vectors, or exp(2 pi i n x) when none are given"""

    name = 'trig'

    def __init__(self, vectors: Optional[Sequence[Sequence[int]]] = None, dim: int = 1):
        self.vectors = None if vectors is None else [tuple(int(c) for c in v) for v in vectors]
        self.dim = len(self.vectors[0]) if self.vectors else dim

    def vector(self, n: int) -> tuple:
        if self.vectors is None:
            return (n,) + (0,) * (self.dim - 1)
        if not 1 <= n <= len(self.vectors):
            raise DomainError(f"Trig system has no function {n}")
        return self.vectors[n - 1]

    def values(self, n: int, grid: int) -> np.ndarray:
        axes = grid_axes(grid, self.dim)
        exponent = np.zeros(axes.shape[1], dtype=np.int64)
        for axis, v in enumerate(self.vector(n)):
            exponent = (exponent + (v % grid) * axes[axis]) % grid
        return root_table(grid)[exponent]

    def required_resolution(self, indices: Sequence[int]) -> int:
        return max(2, 4 * max(max(abs(c) for c in self.vector(n)) for n in indices))


class PolynomialSystemEvaluator(SystemEvaluator):
    """A list of (1-d or d-dim) trigonometric polynomials"""

    name = 'polynomial'

    def __init__(self, polys: Sequence[TrigPolynomial]):
        if not polys:
            raise DomainError("Polynomial system is empty")
        self.polys = list(polys)
        self.dim = self.polys[0].dim

    def _poly(self, n: int) -> TrigPolynomial:
        if not 1 <= n <= len(self.polys):
            raise DomainError(f"Polynomial system has no function {n}")
        return self.polys[n - 1]

    def values(self, n: int, grid: int) -> np.ndarray:
        return self._poly(n).grid_values(grid)

    def required_resolution(self, indices: Sequence[int]) -> int:
        top = 0
        for n in indices:
            for freq in self._poly(n).terms:
                top = max(top, *(abs(c) for c in ((freq,) if self.dim == 1 else freq)))
        return max(2, 4 * top)


class DTSSystemEvaluator(SystemEvaluator):
    """
    DTS functions t^(orders)_(index_n). Values are looked up in one root table
    of order p = prod(orders), so a multiple system and its one-dimensional
    image produce bit-identical values on corresponding cells.
    """

    name = 'dts'

    def __init__(self, orders: Sequence[int], indices: Sequence[Sequence[int]]):
        self.orders = tuple(int(q) for q in orders)
        self.dim = len(self.orders)
        self.order = math.prod(self.orders)
        self.indices = [tuple(int(c) for c in idx) for idx in indices]
        for idx in self.indices:
            if len(idx) != self.dim or any(not 0 <= c < q for c, q in zip(idx, self.orders)):
                raise DomainError(f"DTS index {idx} does not fit orders {self.orders}")

    @classmethod
    def theta_image(cls, moduli: CoprimeModuli, indices: Sequence[Sequence[int]]) -> 'DTSSystemEvaluator':
        """The one-dimensional system t^(p)_tau(n_vec) for the given multi-indices"""
        return cls((moduli.product,), [(crt_tau(moduli, idx),) for idx in indices])

    def values(self, n: int, grid: int) -> np.ndarray:
        if not 1 <= n <= len(self.indices):
            raise DomainError(f"DTS system has no function {n}")
        axes = grid_axes(grid, self.dim)
        p = self.order
        exponent = np.zeros(axes.shape[1], dtype=np.int64)
        for axis, (c, q) in enumerate(zip(self.indices[n - 1], self.orders)):
            cells = axes[axis] * q // grid
            exponent = (exponent + (c * (p // q) % p) * cells) % p
        return root_table(p)[exponent]

    def required_resolution(self, indices: Sequence[int]) -> int:
        return math.lcm(*self.orders)

    def grid_ok(self, indices: Sequence[int], grid: int) -> bool:
        return grid % self.required_resolution(indices) == 0


class PlanSystemEvaluator(SystemEvaluator):
    """Slot polynomials g_n of a reduction plan"""

    name = 'plan'

    def __init__(self, plan: ReductionPlan, shifted: bool = True):
        self.plan = plan
        self.shifted = shifted

    def values(self, n: int, grid: int) -> np.ndarray:
        return self.plan.slot(n).grid_values(grid, self.shifted)

    def required_resolution(self, indices: Sequence[int]) -> int:
        # a block shares one shift, which multiplies partial sums by a unimodular factor
        return max(2, 4 * max(self.plan.slot(n).max_abs_raw_frequency for n in indices))


# ---------------------------------------------------------------------------
# Block maxima
# ---------------------------------------------------------------------------

@dataclass
class BlockMaximaReport:
    system: str
    grid: int
    dim: int
    maxima: Dict[int, np.ndarray] = field(default_factory=dict)

    def summary(self, k: int) -> Dict[str, float]:
        values = self.maxima[k]
        q50, q90, q99 = np.quantile(values, QUANTILES)
        return {'k': k, 'sup_Mk': float(values.max()), 'mean_Mk': float(values.mean()),
                'q50': float(q50), 'q90': float(q90), 'q99': float(q99)}

    def rows(self) -> List[Dict[str, float]]:
        return [self.summary(k) for k in sorted(self.maxima)]

    def to_json(self) -> Dict[str, Any]:
        return {'system': self.system, 'grid': self.grid, 'dim': self.dim, 'blocks': self.rows()}


def _check_coefficients(a: Sequence[complex], last: int) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if len(a) < last:
        raise DomainError(f"Need coefficients a_1..a_{last}, got {len(a)}")
    return a


def block_maximum(sys: SystemEvaluator, a: Sequence[complex], k: int, grid: int) -> np.ndarray:
    """M_k(x) = max over 2^k <= m < 2^(k+1) of |sum_{n=2^k}^m a_n phi_n(x)|, by running sums"""
    indices = block_indices(k)
    a = _check_coefficients(a, indices[-1])
    if grid < 2:
        raise DomainError(f"Grid must be >= 2, got {grid}")
    partial = np.zeros(grid ** sys.dim, dtype=complex)
    maximum = np.zeros(grid ** sys.dim)
    for n in indices:
        if a[n - 1] == 0:
            continue
        partial += a[n - 1] * sys.values(n, grid)
        np.maximum(maximum, np.abs(partial), out=maximum)
    return maximum


def block_maxima(sys: SystemEvaluator, a: Sequence[complex], k_max: int, grid: int) -> BlockMaximaReport:
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    _check_coefficients(a, 2 ** (k_max + 1) - 1)
    report = BlockMaximaReport(sys.name, grid, sys.dim)
    for k in range(k_max + 1):
        report.maxima[k] = block_maximum(sys, a, k, grid)
        logger.debug(f"📊 M_{k}: sup={report.maxima[k].max():.6f}")
    logger.info(f"✅ Block maxima for k <= {k_max} on a {grid}^{sys.dim} grid")
    return report


# ---------------------------------------------------------------------------
# Error bound and distribution comparison
# ---------------------------------------------------------------------------

@dataclass
class DeltaBoundReport:
    k: int
    coefficient_mass: float
    distance_mass: float
    distances: List[float]

    @property
    def bound(self) -> float:
        return self.coefficient_mass * self.distance_mass

    @property
    def dyadic_ratio(self) -> float:
        """distance_mass / 2^-k"""
        return self.distance_mass * 2 ** self.k

    def to_json(self) -> Dict[str, Any]:
        return {'k': self.k, 'coefficient_mass': self.coefficient_mass,
                'distance_mass': self.distance_mass, 'bound': self.bound,
                'dyadic_ratio': self.dyadic_ratio, 'distances': self.distances}


def delta_bound(a: Sequence[complex], fs: Sequence[L2Object], gs: Sequence[L2Object], k: int) -> DeltaBoundReport:
    """||delta_k||^2 <= (sum_block |a_n|^2) * (sum_block ||f_n - g_n||^2)"""
    indices = block_indices(k)
    if len(fs) != len(indices) or len(gs) != len(indices):
        raise DomainError(f"Block {k} has {len(indices)} members, got {len(fs)} and {len(gs)} functions")
    a = _check_coefficients(a, indices[-1])
    distances = [l2_distance(f, g) for f, g in zip(fs, gs)]
    coefficient_mass = float(np.sum(np.abs(a[indices[0] - 1:indices[-1]]) ** 2))
    distance_mass = math.fsum(d * d for d in distances)
    return DeltaBoundReport(k, coefficient_mass, distance_mass, distances)


def distribution_compare(sys_a: SystemEvaluator, a_a: Sequence[complex],
                         sys_b: SystemEvaluator, a_b: Sequence[complex],
                         k: int, grid_a: int, grid_b: int) -> float:
    """
    Kolmogorov-Smirnov distance between the empirical distributions of M_k
    under two systems, each grid read as a uniform sample of the torus/cube.

    Raises:
        GridResolutionError: a grid does not resolve its system (carries the required resolution)
    """
    sys_a.check_grid(block_indices(k), grid_a)
    sys_b.check_grid(block_indices(k), grid_b)
    m_a = np.round(block_maximum(sys_a, a_a, k, grid_a), Config.KS_ROUND_DECIMALS)
    m_b = np.round(block_maximum(sys_b, a_b, k, grid_b), Config.KS_ROUND_DECIMALS)
    statistic = float(ks_2samp(m_a, m_b).statistic)
    logger.info(f"📊 KS distance of M_{k} ({sys_a.name} vs {sys_b.name}): {statistic:.6f}")
    return statistic


# ---------------------------------------------------------------------------
# Weight diagnostics
# ---------------------------------------------------------------------------

SUMMABILITY_NOTE = ("partial sums of 1/(n w(n)) are a finite-range diagnostic; "
                    "convergence of the series is not decidable at finite N")
GROWTH_NOTE = "strict increase on 1..N stands in for w(n) -> infinity"


def doubling_constant(values: np.ndarray) -> float:
    """C(N) = max over n <= sqrt N of w(n^2)/w(n), from w(1..N)"""
    roots = np.arange(1, math.isqrt(len(values)) + 1)
    return float(np.max(values[roots ** 2 - 1] / values[roots - 1]))


@dataclass
class WeightCheckReport:
    weight: str
    n: int
    monotonicity_violations: int
    first_violations: List[int]
    strictly_increasing: bool
    increases: bool
    doubling_constant: float
    doubling_reference: float
    envelope: List[Dict[str, float]]
    summability: List[Dict[str, float]]

    @property
    def doubling_limit(self) -> float:
        """DOUBLING_FACTOR times C(N) of the log^2 weight on the same range"""
        return Config.DOUBLING_FACTOR * self.doubling_reference

    @property
    def doubling_ok(self) -> bool:
        return self.doubling_constant <= self.doubling_limit

    @property
    def passed(self) -> bool:
        return self.monotonicity_violations == 0 and self.increases and self.doubling_ok

    def to_json(self) -> Dict[str, Any]:
        return {
            'weight': self.weight,
            'n': self.n,
            'passed': self.passed,
            'monotonicity_violations': self.monotonicity_violations,
            'first_violations': self.first_violations,
            'strictly_increasing': self.strictly_increasing,
            'increases': self.increases,
            'growth_note': GROWTH_NOTE,
            'doubling_constant': self.doubling_constant,
            'doubling_reference': self.doubling_reference,
            'doubling_limit': self.doubling_limit,
            'doubling_ok': self.doubling_ok,
            'envelope': self.envelope,
            'summability': self.summability,
            'summability_note': SUMMABILITY_NOTE,
        }


def weight_check(w: WeightSequence, N: int) -> WeightCheckReport:
    """
    Monotonicity, C(N) = max_{n <= sqrt N} w(n^2)/w(n), envelope ratios
    w(n)/log n and w(n)/log^2 n at N/4, N/2, N, and dyadic partial sums of
    sum 1/(n w(n)).
    """
    if N < 4:
        raise DomainError(f"weight_check needs N >= 4, got {N}")
    values = w.values(N)
    if np.any(values <= 0):
        raise DomainError(f"Weight {w.name} has nonpositive values on 1..{N}")
    steps = np.diff(values)
    violations = np.nonzero(steps < 0)[0] + 2

    doubling = doubling_constant(values)

    envelope = []
    for n in (max(2, N // 4), N // 2, N):
        log_n = math.log(n)
        envelope.append({'n': n, 'w': float(values[n - 1]),
                         'ratio_log': float(values[n - 1] / log_n),
                         'ratio_log2': float(values[n - 1] / log_n ** 2)})

    partial = np.cumsum(1.0 / (np.arange(1, N + 1) * values))
    summability = [{'n': 2 ** j, 'partial_sum': float(partial[2 ** j - 1])}
                   for j in range(N.bit_length()) if 2 ** j <= N]

    report = WeightCheckReport(
        weight=w.name,
        n=N,
        monotonicity_violations=len(violations),
        first_violations=violations[:10].tolist(),
        strictly_increasing=bool(np.all(steps > 0)),
        increases=bool(values[-1] > values[0]),
        doubling_constant=doubling,
        doubling_reference=doubling_constant(WeightSequence.log2().values(N)),
        envelope=envelope,
        summability=summability,
    )
    if report.doubling_ok:
        logger.info(f"✅ {w.name}: C(N)={doubling:.4f} on N={N}")
    else:
        logger.warning(f"⚠️ {w.name}: C(N)={doubling:.4g} exceeds {report.doubling_limit:.4g}, {Config.DOUBLING_FACTOR:g} x the log^2 value")
    return report
