"""
Weight sequences w(n) used as candidate Weyl multipliers.

Named presets keep runs reproducible without an expression parser:
log, log2, pow:<alpha>, const:<c>, table:<file>.
"""

import json
import logging
import os
from typing import Callable, Sequence, Union

import numpy as np

from utils.errors import DomainError

logger = logging.getLogger(__name__)

ADMISSIBILITY_SAMPLE = 1 << 16


class WeightSequence:
    """Positive weights n -> w(n) for n >= 1, evaluated elementwise on integer arrays"""

    def __init__(self, name: str, rule: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self._rule = rule

    def __repr__(self) -> str:
        return f"WeightSequence({self.name!r})"

    def __call__(self, n: Union[int, Sequence[int], np.ndarray]):
        scalar = np.ndim(n) == 0
        values = np.asarray(self._rule(np.asarray(n, dtype=float)), dtype=float)
        return float(values) if scalar else values

    def values(self, n_max: int) -> np.ndarray:
        """w(1), ..., w(n_max)"""
        return self(np.arange(1, n_max + 1))

    @classmethod
    def log(cls) -> 'WeightSequence':
        return cls('log', lambda n: np.log(n + 2))

    @classmethod
    def log2(cls) -> 'WeightSequence':
        return cls('log2', lambda n: np.log(n + 2) ** 2)

    @classmethod
    def power(cls, alpha: float) -> 'WeightSequence':
        return cls(f'pow:{alpha:g}', lambda n: n ** alpha)

    @classmethod
    def constant(cls, c: float) -> 'WeightSequence':
        return cls(f'const:{c:g}', lambda n: np.full(np.shape(n), float(c)))

    @classmethod
    def table(cls, path: str) -> 'WeightSequence':
        """Tabulated w(1..K) from a JSON list or a one-value-per-line text file"""
        if not os.path.exists(path):
            raise DomainError(f"Weight table not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        try:
            values = json.loads(text) if text.lstrip().startswith('[') else \
                [float(line) for line in text.split() if line.strip()]
        except ValueError as e:
            raise DomainError(f"Cannot read weight table {path}: {e}") from e
        table = np.asarray(values, dtype=float)
        if table.ndim != 1 or not len(table):
            raise DomainError(f"Weight table {path} must be a non-empty list of numbers")

        def rule(n: np.ndarray) -> np.ndarray:
            idx = np.asarray(n, dtype=np.int64) - 1
            if np.any(idx < 0) or np.any(idx >= len(table)):
                raise DomainError(f"Weight table {path} covers n = 1..{len(table)} only")
            return table[idx]

        return cls(f'table:{path}', rule)

    @classmethod
    def parse(cls, spec: str) -> 'WeightSequence':
        """Build a preset from its name: log, log2, pow:<alpha>, const:<c>, table:<file>"""
        spec = spec.strip()
        if spec == 'log':
            return cls.log()
        if spec == 'log2':
            return cls.log2()
        kind, _, arg = spec.partition(':')
        try:
            if kind == 'pow' and arg:
                return cls.power(float(arg))
            if kind == 'const' and arg:
                return cls.constant(float(arg))
        except ValueError as e:
            raise DomainError(f"Bad weight parameter in '{spec}'") from e
        if kind == 'table' and arg:
            return cls.table(arg)
        raise DomainError(f"Unknown weight preset '{spec}' (expected log, log2, pow:a, const:c, table:file)")

    def sample_points(self, n_max: int) -> np.ndarray:
        """Every n up to ADMISSIBILITY_SAMPLE, then a geometric sample up to n_max"""
        dense = np.arange(1, min(n_max, ADMISSIBILITY_SAMPLE) + 1, dtype=float)
        if n_max <= ADMISSIBILITY_SAMPLE:
            return dense
        sparse = np.unique(np.round(np.geomspace(ADMISSIBILITY_SAMPLE, n_max, 512)))
        return np.concatenate([dense, sparse[sparse > ADMISSIBILITY_SAMPLE]])

    def assert_admissible(self, n_max: int) -> None:
        """
        Positive, nondecreasing and w(n_max) > w(1) on the sampled range.

        Raises:
            DomainError: any of the three fails
        """
        points = self.sample_points(max(n_max, 2))
        values = self(points)
        if np.any(values <= 0):
            raise DomainError(f"Weight {self.name} has nonpositive values")
        if np.any(np.diff(values) < 0):
            raise DomainError(f"Weight {self.name} is not nondecreasing")
        if not values[-1] > values[0]:
            raise DomainError(f"Weight {self.name} does not increase on 1..{int(points[-1])}")
