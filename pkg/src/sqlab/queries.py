"""Query functions on {0,1}^n.

Structured variants (coordinate, conjunction, parity, constant) have closed
form expectations under every distribution family in ``sqlab.distributions``;
tabulated and real-valued queries are evaluated pointwise.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Callable

import numpy as np

from .points import IndexSet, Point


def _bits(x) -> int:
    return x.bits if isinstance(x, Point) else int(x)


class Query:
    """Base class; subclasses are immutable and hashable."""

    boolean: bool = False

    def __call__(self, x):
        raise NotImplementedError

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on the rows of an (N, n) 0/1 matrix."""
        weights = 1 << np.arange(X.shape[1], dtype=object)
        return np.array([self(int(np.dot(row.astype(object), weights))) for row in X])

    def digest(self) -> str:
        raise NotImplementedError

    @property
    def support(self) -> tuple[int, ...] | None:
        """Coordinates the query depends on, or None when unknown."""
        return None


@dataclass(frozen=True)
class Coordinate(Query):
    index: int
    boolean = True

    def __call__(self, x) -> int:
        return (_bits(x) >> self.index) & 1

    def evaluate_many(self, X):
        return X[:, self.index].astype(np.int64)

    def digest(self):
        return f"coord:{self.index}"

    @property
    def support(self):
        return (self.index,)


@dataclass(frozen=True)
class Conjunction(Query):
    """1 iff every coordinate in ``indices`` is set."""

    indices: tuple[int, ...]
    boolean = True

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(set(int(i) for i in self.indices))))

    @classmethod
    def over(cls, s: IndexSet) -> "Conjunction":
        return cls(s.indices)

    @property
    def mask(self) -> int:
        m = 0
        for i in self.indices:
            m |= 1 << i
        return m

    def __call__(self, x) -> int:
        m = self.mask
        return int(_bits(x) & m == m)

    def evaluate_many(self, X):
        if not self.indices:
            return np.ones(X.shape[0], dtype=np.int64)
        return X[:, list(self.indices)].all(axis=1).astype(np.int64)

    def digest(self):
        return "conj:" + ",".join(map(str, self.indices))

    @property
    def support(self):
        return self.indices


@dataclass(frozen=True)
class Parity(Query):
    """chi_c(x) = -(-1)^(c.x), i.e. +1 when c.x is odd.

    With ``signed=False`` the query is the 0/1 indicator (1 + chi_c)/2,
    which is what VSTAT and SAMPLE accept.
    """

    indices: tuple[int, ...]
    signed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(set(int(i) for i in self.indices))))

    @property
    def boolean(self) -> bool:  # type: ignore[override]
        return not self.signed

    @property
    def mask(self) -> int:
        m = 0
        for i in self.indices:
            m |= 1 << i
        return m

    def __call__(self, x) -> int:
        odd = (_bits(x) & self.mask).bit_count() & 1
        if self.signed:
            return 1 if odd else -1
        return odd

    def evaluate_many(self, X):
        if not self.indices:
            odd = np.zeros(X.shape[0], dtype=np.int64)
        else:
            odd = X[:, list(self.indices)].sum(axis=1).astype(np.int64) & 1
        return 2 * odd - 1 if self.signed else odd

    def digest(self):
        tag = "parity" if self.signed else "parity01"
        return f"{tag}:" + ",".join(map(str, self.indices))

    @property
    def support(self):
        return self.indices


@dataclass(frozen=True)
class Constant(Query):
    value: Fraction | int | float = 1

    @property
    def boolean(self) -> bool:  # type: ignore[override]
        return self.value in (0, 1)

    def __call__(self, x):
        return self.value

    def evaluate_many(self, X):
        return np.full(X.shape[0], self.value, dtype=object if isinstance(self.value, Fraction) else None)

    def digest(self):
        return f"const:{self.value}"

    @property
    def support(self):
        return ()


@dataclass(frozen=True)
class Tabulated(Query):
    """Truth table over all 2**n points (n <= 20); ``values[x]`` is h(x)."""

    n: int
    values: tuple

    def __post_init__(self):
        if self.n > 20:
            raise ValueError("tabulated queries are limited to n <= 20")
        if len(self.values) != 1 << self.n:
            raise ValueError(f"expected {1 << self.n} table entries, got {len(self.values)}")
        if any(not -1 <= v <= 1 for v in self.values):
            raise ValueError("table values must lie in [-1, 1]")

    @cached_property
    def boolean(self) -> bool:  # type: ignore[override]
        return all(v in (0, 1) for v in self.values)

    def __call__(self, x):
        return self.values[_bits(x)]

    def evaluate_many(self, X):
        idx = X.astype(np.int64) @ (1 << np.arange(X.shape[1], dtype=np.int64))
        table = np.array(self.values, dtype=object if not self.boolean else np.int64)
        return table[idx]

    def digest(self):
        h = hashlib.sha1(repr(self.values).encode()).hexdigest()[:16]
        return f"table{self.n}:{h}"


@dataclass(frozen=True)
class RealValued(Query):
    """Arbitrary evaluator with range [-1, 1]; ``label`` names it in transcripts."""

    fn: Callable[[int], float] = field(compare=False)
    label: str
    boolean_range: bool = False

    @property
    def boolean(self) -> bool:  # type: ignore[override]
        return self.boolean_range

    def __call__(self, x):
        v = self.fn(_bits(x))
        if not -1 <= v <= 1:
            raise ValueError(f"query {self.label!r} returned {v!r} outside [-1, 1]")
        return v

    def digest(self):
        return f"real:{self.label}"

