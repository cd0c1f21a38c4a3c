"""Points of {0,1}^n and index sets, stored as integer bitsets.

Bit ``i`` of a point's integer encodes coordinate ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class Point:
    n: int
    bits: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bit pattern does not fit in {self.n} coordinates")

    @classmethod
    def from_sequence(cls, values: Sequence[int]) -> "Point":
        bits = 0
        for i, v in enumerate(values):
            if v not in (0, 1):
                raise ValueError(f"coordinate {i} is {v!r}, expected 0 or 1")
            if v:
                bits |= 1 << i
        return cls(len(values), bits)

    @classmethod
    def from_string(cls, row: str) -> "Point":
        return cls.from_sequence([int(ch) for ch in row.strip()])

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def __iter__(self) -> Iterator[int]:
        return (((self.bits >> i) & 1) for i in range(self.n))

    def __len__(self) -> int:
        return self.n

    def to_array(self) -> np.ndarray:
        return np.fromiter(self, dtype=np.uint8, count=self.n)

    def to_string(self) -> str:
        return "".join(str(b) for b in self)


@dataclass(frozen=True)
class IndexSet:
    """Sorted set of coordinates in ``[0, n)``."""

    n: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise ValueError(f"indices must lie in [0, {self.n})")

    @classmethod
    def of(cls, n: int, indices: Iterable[int]) -> "IndexSet":
        return cls(n, tuple(sorted(set(int(i) for i in indices))))

    @property
    def mask(self) -> int:
        m = 0
        for i in self.indices:
            m |= 1 << i
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def overlap(self, other: "IndexSet") -> int:
        return (self.mask & other.mask).bit_count()

    def to_list(self) -> list[int]:
        return list(self.indices)


def popcount(x: int) -> int:
    return x.bit_count()


def all_point_bits(n: int) -> np.ndarray:
    """(2**n, n) uint8 matrix whose row ``x`` holds the bits of ``x``."""
    xs = np.arange(1 << n, dtype=np.int64)
    return ((xs[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def popcount_array(a: np.ndarray) -> np.ndarray:
    """Vectorised popcount of a non-negative int64 array."""
    a = a.astype(np.uint64, copy=True)
    a = a - ((a >> np.uint64(1)) & np.uint64(0x5555555555555555))
    a = (a & np.uint64(0x3333333333333333)) + ((a >> np.uint64(2)) & np.uint64(0x3333333333333333))
    a = (a + (a >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((a * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


def read_matrix(path) -> np.ndarray:
    """Read rows of '0'/'1' characters into an uint8 matrix."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(ch) for ch in line])
    if not rows:
        return np.zeros((0, 0), dtype=np.uint8)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    arr = np.array(rows, dtype=np.uint8)
    if arr.max(initial=0) > 1:
        raise ValueError(f"{path}: entries must be 0 or 1")
    return arr


def format_matrix(matrix: np.ndarray) -> str:
    return "".join("".join("1" if v else "0" for v in row) + "\n" for row in matrix)
