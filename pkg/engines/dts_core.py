"""
Discrete Trigonometric Systems

Step functions t_n^(l)(x) = exp(2*pi*i*n*k/l) on the cells [k/l, (k+1)/l),
their tensor products, exact roots of unity, Fourier coefficients against
the ordinary trigonometric system, spectra, and truncated trigonometric
polynomial approximants.
"""

import cmath
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import polygamma

from utils.errors import DomainError

logger = logging.getLogger(__name__)

Frequency = Union[int, Tuple[int, ...]]
Point = Union[float, Fraction, Sequence[float]]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Exact roots of unity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RootOfUnity:
    """exp(2*pi*i*num/mod), stored reduced: 0 <= num < mod, gcd(num, mod) == 1 (or 0/1)"""

    num: int
    mod: int

    def __post_init__(self):
        if self.mod < 1:
            raise DomainError(f"Root of unity modulus must be positive, got {self.mod}")
        num = self.num % self.mod
        g = math.gcd(num, self.mod)
        if num == 0:
            object.__setattr__(self, 'num', 0)
            object.__setattr__(self, 'mod', 1)
        else:
            object.__setattr__(self, 'num', num // g)
            object.__setattr__(self, 'mod', self.mod // g)

    def __mul__(self, other: 'RootOfUnity') -> 'RootOfUnity':
        if not isinstance(other, RootOfUnity):
            return NotImplemented
        mod = self.mod * other.mod // math.gcd(self.mod, other.mod)
        return RootOfUnity(self.num * (mod // self.mod) + other.num * (mod // other.mod), mod)

    def conjugate(self) -> 'RootOfUnity':
        return RootOfUnity(-self.num, self.mod)

    def to_complex(self) -> complex:
        if self.num == 0:
            return 1 + 0j
        return cmath.exp(2j * math.pi * self.num / self.mod)

    def to_json(self) -> Dict[str, int]:
        return {'num': self.num, 'mod': self.mod}


@lru_cache(maxsize=64)
def root_table(order: int) -> np.ndarray:
    """exp(2*pi*i*k/order) for k = 0..order-1 (read-only)"""
    table = np.exp(2j * np.pi * np.arange(order) / order)
    table.setflags(write=False)
    return table


# ---------------------------------------------------------------------------
# Discrete trigonometric systems
# ---------------------------------------------------------------------------

def cell_index(l: int, x: Union[float, Fraction]) -> int:
    """Index k of the half-open cell [k/l, (k+1)/l) containing x mod 1"""
    x = x % 1
    return min(int(math.floor(l * x)), l - 1)


def _check_index(l: int, n: int) -> None:
    if l < 1:
        raise DomainError(f"DTS order must be positive, got {l}")
    if not 0 <= n < l:
        raise DomainError(f"DTS index {n} out of range [0, {l})")


def dts_value_exact(l: int, n: int, x: Union[float, Fraction]) -> RootOfUnity:
    """t_n^(l)(x) as an exact root of unity"""
    _check_index(l, n)
    return RootOfUnity(n * cell_index(l, x), l)


def dts_eval(l: int, n: int, x: Union[float, Fraction]) -> complex:
    """Evaluate t_n^(l) at x (reduced mod 1)"""
    return dts_value_exact(l, n, x).to_complex()


def dts_eval_multi(p_vec: Sequence[int], n_vec: Sequence[int], x_vec: Sequence[float]) -> complex:
    """Evaluate the tensor-product DTS function t_n^(p_1..p_d) at a point of the unit cube"""
    if not (len(p_vec) == len(n_vec) == len(x_vec)):
        raise DomainError(
            f"Dimension mismatch: orders {len(p_vec)}, index {len(n_vec)}, point {len(x_vec)}"
        )
    value = RootOfUnity(0, 1)
    for p, n, x in zip(p_vec, n_vec, x_vec):
        value = value * dts_value_exact(p, n, x)
    return value.to_complex()


def dts_gram_exact(l: int, n: int, n2: int) -> Fraction:
    """
    Exact L2 inner product of t_n^(l) and t_n2^(l).

    The value is (1/l) * sum_k w^(e_k) with e_k = (n - n2) k mod l. When the
    exponent multiset is invariant under a non-zero rotation r the sum S
    satisfies S = w^r S with w^r != 1, hence S = 0; otherwise every exponent
    is 0 and the product is 1.
    """
    _check_index(l, n)
    _check_index(l, n2)
    delta = (n - n2) % l
    counts = [0] * l
    for k in range(l):
        counts[(delta * k) % l] += 1
    if delta == 0:
        if counts[0] != l:
            raise ArithmeticError("exponent count mismatch")
        return Fraction(1)
    rotation = math.gcd(delta, l)
    if all(counts[e] == counts[(e + rotation) % l] for e in range(l)):
        return Fraction(0)
    raise ArithmeticError(f"exponent multiset for l={l}, delta={delta} is not rotation invariant")


@dataclass(frozen=True)
class DiscreteTrigSystem:
    """Order-l DTS on the unit torus (d = 1) or the tensor product of per-axis systems"""

    orders: Tuple[int, ...]

    def __post_init__(self):
        orders = tuple(int(p) for p in self.orders)
        if not orders:
            raise DomainError("A DTS needs at least one axis")
        if any(p < 2 for p in orders):
            raise DomainError(f"All axis orders must be >= 2, got {orders}")
        object.__setattr__(self, 'orders', orders)

    @property
    def dimension(self) -> int:
        return len(self.orders)

    @property
    def order(self) -> int:
        return math.prod(self.orders)

    def indices(self) -> Iterator[Tuple[int, ...]]:
        """All multi-indices of the system in row-major order"""
        return itertools.product(*(range(p) for p in self.orders))

    def _check(self, n_vec: Sequence[int]) -> Tuple[int, ...]:
        n_vec = tuple(int(n) for n in n_vec)
        if len(n_vec) != self.dimension:
            raise DomainError(f"Index {n_vec} does not match dimension {self.dimension}")
        for p, n in zip(self.orders, n_vec):
            _check_index(p, n)
        return n_vec

    def value_at_cell(self, n_vec: Sequence[int], cell: Sequence[int]) -> RootOfUnity:
        """Exact value of t_n on the cell with per-axis indices `cell`"""
        n_vec = self._check(n_vec)
        p = self.order
        exponent = sum(n * u * (p // q) for q, n, u in zip(self.orders, n_vec, cell))
        return RootOfUnity(exponent, p)

    def evaluate(self, n_vec: Sequence[int], x_vec: Sequence[float]) -> complex:
        return dts_eval_multi(self.orders, self._check(n_vec), x_vec)

    def gram(self, n_vec: Sequence[int], m_vec: Sequence[int]) -> Fraction:
        """Exact inner product of two system functions (product of per-axis Gram entries)"""
        n_vec, m_vec = self._check(n_vec), self._check(m_vec)
        value = Fraction(1)
        for p, n, m in zip(self.orders, n_vec, m_vec):
            value *= dts_gram_exact(p, n, m)
        return value


# ---------------------------------------------------------------------------
# Fourier coefficients and spectra
# ---------------------------------------------------------------------------

def cell_integral(l: int, m: int) -> complex:
    """Integral of exp(-2*pi*i*m*x) over [0, 1/l]"""
    if m == 0:
        return 1.0 / l
    r = m % l
    return (1 - cmath.exp(-2j * math.pi * r / l)) / (2j * math.pi * m)


def dts_fourier_coeff(l: int, n: int, m: int) -> complex:
    """
    Fourier coefficient c_m(t_n^(l)) against exp(2*pi*i*m*x).

    Args:
        l: DTS order
        n: DTS index in [0, l)
        m: integer frequency

    Returns:
        complex: exactly 0 off the progression n + l*Z, else l * I(m)
    """
    _check_index(l, n)
    if (n - m) % l != 0:
        return 0j
    return complex(l * cell_integral(l, m))


def progression_coefficients(l: int, n: int, js: np.ndarray) -> np.ndarray:
    """c_{n + l j}(t_n^(l)) for an integer array of j (vectorised closed form)"""
    js = np.asarray(js, dtype=np.int64)
    if n % l == 0:
        out = np.zeros(js.shape, dtype=complex)
        out[js == 0] = 1.0
        return out
    theta = n / l
    return (1 - cmath.exp(-2j * math.pi * theta)) / (2j * math.pi * (theta + js))


def decay_constant(orders: Iterable[int], j_max: int) -> float:
    """max over l in orders, n < l, |j| <= j_max of (|j| + 1) * |c_{n + l j}(t_n^(l))|"""
    js = np.arange(-j_max, j_max + 1)
    worst = 0.0
    for l in orders:
        for n in range(l):
            coeffs = np.abs(progression_coefficients(l, n, js))
            worst = max(worst, float(np.max((np.abs(js) + 1) * coeffs)))
    logger.debug(f"📊 decay constant over j_max={j_max}: {worst:.6f}")
    return worst


@dataclass(frozen=True)
class FrequencySet:
    """Finite set of integer frequencies (d = 1) or frequency vectors"""

    dim: int
    values: frozenset

    @classmethod
    def of(cls, dim: int, values: Iterable[Frequency]) -> 'FrequencySet':
        return cls(dim, frozenset(_as_key(v, dim) for v in values))

    def isdisjoint(self, other: 'FrequencySet') -> bool:
        if self.dim != other.dim:
            raise DomainError(f"Cannot compare frequency sets of dimensions {self.dim} and {other.dim}")
        return self.values.isdisjoint(other.values)

    def shifted(self, nu: Frequency) -> 'FrequencySet':
        return FrequencySet.of(self.dim, (_add(v, nu, self.dim) for v in self.values))

    def union(self, other: 'FrequencySet') -> 'FrequencySet':
        if self.dim != other.dim:
            raise DomainError("Dimension mismatch in frequency set union")
        return FrequencySet(self.dim, self.values | other.values)

    def __contains__(self, item) -> bool:
        return _as_key(item, self.dim) in self.values

    def __iter__(self):
        return iter(sorted(self.values))

    def __len__(self) -> int:
        return len(self.values)


def dts_spectrum(l: int, n: int, J: int) -> FrequencySet:
    """{n + l j : |j| <= J}"""
    _check_index(l, n)
    if J < 0:
        raise DomainError(f"Half-width must be non-negative, got {J}")
    return FrequencySet.of(1, (n + l * j for j in range(-J, J + 1)))


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------

def central_window(T: int) -> Tuple[int, int]:
    """
    Inclusive j-range of the T progression terms with smallest |j|.

    Ties between j < 0 and j > 0 go to j < 0, so T = 2 keeps {-1, 0}.
    """
    if T < 1:
        raise DomainError(f"Term budget must be >= 1, got {T}")
    return -(T // 2), (T - 1) // 2


def window_tail(theta, j_lo: int, j_hi: int):
    """
    Parseval deficit of keeping j in [j_lo, j_hi] for residue fraction theta = n/l.

    |c_{n+lj}|^2 = sin^2(pi theta) / (pi^2 (theta + j)^2) and the omitted sums are
    trigamma values, so the deficit never needs the terms themselves.
    """
    theta = np.asarray(theta, dtype=float)
    scale = np.sin(np.pi * theta) ** 2 / np.pi ** 2
    tail = polygamma(1, theta + j_hi + 1) + polygamma(1, 1 - j_lo - theta)
    return np.where(theta == 0.0, 0.0, scale * tail)


def truncation_error_sq(l: int, n: int, T: int) -> float:
    """||t_n^(l) - dts_truncate(l, n, T)||^2"""
    _check_index(l, n)
    j_lo, j_hi = central_window(T)
    return float(window_tail(n / l, j_lo, j_hi))


def parseval_deficit(l: int, n: int, J: int) -> float:
    """1 - sum_{|j| <= J} |c_{n+lj}|^2"""
    _check_index(l, n)
    return float(window_tail(n / l, -J, J))


def dts_truncate(l: int, n: int, T: int) -> 'TrigPolynomial':
    """
    Trigonometric polynomial keeping the T central spectral terms of t_n^(l).

    Zero coefficients (n = 0, j != 0) are not stored.
    """
    _check_index(l, n)
    j_lo, j_hi = central_window(T)
    js = np.arange(j_lo, j_hi + 1)
    coeffs = progression_coefficients(l, n, js)
    terms = {n + l * int(j): complex(c) for j, c in zip(js, coeffs) if c != 0}
    return TrigPolynomial(1, terms)


# ---------------------------------------------------------------------------
# Trigonometric polynomials
# ---------------------------------------------------------------------------

def _as_key(freq: Frequency, dim: int) -> Frequency:
    if dim == 1:
        if isinstance(freq, (tuple, list)):
            if len(freq) != 1:
                raise DomainError(f"Frequency {freq} is not one-dimensional")
            return int(freq[0])
        return int(freq)
    freq = tuple(int(f) for f in freq)
    if len(freq) != dim:
        raise DomainError(f"Frequency {freq} does not match dimension {dim}")
    return freq


def _add(freq: Frequency, nu: Frequency, dim: int) -> Frequency:
    if dim == 1:
        return _as_key(freq, 1) + _as_key(nu, 1)
    return tuple(a + b for a, b in zip(_as_key(freq, dim), _as_key(nu, dim)))


def grid_sum(residues: np.ndarray, coeffs: np.ndarray, grid: int, dim: int = 1,
             chunk: int = 256) -> np.ndarray:
    """
    Evaluate sum_t coeffs[t] * exp(2*pi*i * <m_t, x>) on the uniform grid x = i/grid.

    `residues` holds the frequencies reduced mod grid (shape (terms,) or (terms, dim)).
    Terms sharing a residue are merged first, so the cost is O(min(terms, grid^dim) * grid^dim).
    Returns the values flattened in row-major grid order.
    """
    residues = np.asarray(residues, dtype=np.int64).reshape(len(coeffs), dim)
    coeffs = np.asarray(coeffs, dtype=complex)
    flat = np.ravel_multi_index(residues.T, (grid,) * dim) if dim > 1 else residues[:, 0]
    size = grid ** dim
    merged = np.bincount(flat, weights=coeffs.real, minlength=size) \
        + 1j * np.bincount(flat, weights=coeffs.imag, minlength=size)
    active = np.nonzero(merged)[0]
    roots = root_table(grid)
    axes = np.indices((grid,) * dim).reshape(dim, -1)
    values = np.zeros(axes.shape[1], dtype=complex)
    chunk = max(1, min(chunk, (1 << 22) // size))
    for start in range(0, len(active), chunk):
        block = active[start:start + chunk]
        block_res = np.array(np.unravel_index(block, (grid,) * dim)) if dim > 1 else block[None, :]
        exponent = np.zeros((len(block), axes.shape[1]), dtype=np.int64)
        for axis in range(dim):
            exponent += np.outer(block_res[axis], axes[axis])
        values += merged[block] @ roots[exponent % grid]
    return values


class TrigPolynomial:
    """Finite map from integer frequencies (vectors when dim > 1) to complex coefficients"""

    def __init__(self, dim: int, terms: Optional[Dict[Frequency, complex]] = None):
        if dim < 1:
            raise DomainError(f"Dimension must be >= 1, got {dim}")
        self.dim = dim
        self.terms: Dict[Frequency, complex] = {}
        for freq, coeff in (terms or {}).items():
            key = _as_key(freq, dim)
            if key in self.terms:
                raise DomainError(f"Duplicate frequency {key}")
            coeff = complex(coeff)
            if coeff != 0:
                self.terms[key] = coeff

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrigPolynomial) and self.dim == other.dim and self.terms == other.terms

    def __repr__(self) -> str:
        return f"TrigPolynomial(dim={self.dim}, terms={len(self.terms)})"

    def spectrum(self) -> FrequencySet:
        return FrequencySet(self.dim, frozenset(self.terms))

    def l2_norm_sq(self) -> float:
        return math.fsum(abs(c) ** 2 for c in self.terms.values())

    def l2_norm(self) -> float:
        return math.sqrt(self.l2_norm_sq())

    def inner(self, other: 'TrigPolynomial') -> complex:
        self._check_dim(other)
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        total = sum((self.terms[f] * other.terms[f].conjugate()
                     for f in small.terms if f in large.terms), 0j)
        return complex(total)

    def scaled(self, factor: complex) -> 'TrigPolynomial':
        return TrigPolynomial(self.dim, {f: c * factor for f, c in self.terms.items()})

    def modulated(self, nu: Frequency) -> 'TrigPolynomial':
        """Multiply by exp(2*pi*i*<nu, x>), i.e. translate the spectrum by nu"""
        return TrigPolynomial(self.dim, {_add(f, nu, self.dim): c for f, c in self.terms.items()})

    def __add__(self, other: 'TrigPolynomial') -> 'TrigPolynomial':
        self._check_dim(other)
        terms = dict(self.terms)
        for f, c in other.terms.items():
            terms[f] = terms.get(f, 0j) + c
        return TrigPolynomial(self.dim, terms)

    def __sub__(self, other: 'TrigPolynomial') -> 'TrigPolynomial':
        return self + other.scaled(-1)

    def evaluate(self, x: Point) -> complex:
        point = self._point(x)
        total = 0j
        for freq, coeff in self.terms.items():
            freq = (freq,) if self.dim == 1 else freq
            phase = sum((m * xi) % 1 for m, xi in zip(freq, point)) % 1
            total += coeff * cmath.exp(2j * math.pi * float(phase))
        return total

    def grid_values(self, grid: int) -> np.ndarray:
        """Values on the uniform grid of `grid` points per axis (exact phase reduction)"""
        if not self.terms:
            return np.zeros(grid ** self.dim, dtype=complex)
        freqs = [(f,) if self.dim == 1 else f for f in self.terms]
        residues = np.array([[m % grid for m in f] for f in freqs], dtype=np.int64)
        return grid_sum(residues, np.array(list(self.terms.values())), grid, self.dim)

    def to_json(self) -> Dict:
        items = sorted(self.terms.items(), key=lambda kv: (kv[0],) if self.dim == 1 else kv[0])
        return {
            'dim': self.dim,
            'terms': [
                {'freq': [f] if self.dim == 1 else list(f), 're': c.real, 'im': c.imag}
                for f, c in items
            ],
        }

    @classmethod
    def from_json(cls, data: Dict) -> 'TrigPolynomial':
        dim = int(data['dim'])
        terms = {}
        for term in data['terms']:
            key = _as_key(term['freq'], dim)
            if key in terms:
                raise DomainError(f"Duplicate frequency {key} in serialized polynomial")
            terms[key] = complex(term['re'], term['im'])
        return cls(dim, terms)

    def _point(self, x: Point) -> Tuple:
        if self.dim == 1 and not isinstance(x, (tuple, list, np.ndarray)):
            return (x,)
        point = tuple(x)
        if len(point) != self.dim:
            raise DomainError(f"Point of dimension {len(point)} for polynomial of dimension {self.dim}")
        return point

    def _check_dim(self, other: 'TrigPolynomial') -> None:
        if self.dim != other.dim:
            raise DomainError(f"Dimension mismatch: {self.dim} vs {other.dim}")


def poly_eval(f: TrigPolynomial, x: Point) -> complex:
    return f.evaluate(x)


def poly_l2_norm(f: TrigPolynomial) -> float:
    return f.l2_norm()


def poly_inner(f: TrigPolynomial, g: TrigPolynomial) -> complex:
    return f.inner(g)


def lemma_constant(orders: Iterable[int]) -> float:
    """sup over the given orders l and all n < l of l * ||t_n^(l) - g_n||^2 with budget T = l"""
    worst = 0.0
    for l in orders:
        j_lo, j_hi = central_window(l)
        thetas = np.arange(l) / l
        worst = max(worst, float(np.max(l * window_tail(thetas, j_lo, j_hi))))
    return worst


def dts_table(l: int) -> List[Dict]:
    """Cell values of every function of D^(l) as exact roots"""
    return [
        {'n': n, 'values': [RootOfUnity(n * k, l).to_json() for k in range(l)]}
        for n in range(l)
    ]
