"""Distribution families over {0,1}^n.

* ``PlantedDistribution`` -- with probability k/n the plant coordinates are
  Bernoulli(p) and the rest Bernoulli(q); otherwise every coordinate is
  Bernoulli(q).  ``p=1, q=1/2`` is the planted biclique distribution.
* ``ReferenceDistribution`` -- n independent Bernoulli(q) coordinates.
* ``ParityDistribution`` -- uniform over the points x with chi_c(x) equal to
  a target sign, where chi_c(x) = -(-1)^(c.x).

Probabilities are exact ``Fraction`` values.  Sampling converts biases to
floats and is therefore approximate for biases that are not dyadic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from ._numeric import as_fraction
from .points import IndexSet, Point, all_point_bits, popcount_array
from .queries import Conjunction, Constant, Coordinate, Parity, Query

MAX_ENUMERATION_N = 20


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceDistribution:
    n: int
    q: Fraction

    def __post_init__(self):
        object.__setattr__(self, "q", as_fraction(self.q))
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")


@dataclass(frozen=True)
class PlantedDistribution:
    n: int
    plant: IndexSet
    p: Fraction = Fraction(1)
    q: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))
        object.__setattr__(self, "q", as_fraction(self.q))
        if self.plant.n != self.n:
            raise DimensionMismatch("plant lives in a different dimension")
        if not 1 <= len(self.plant) <= self.n:
            raise ValueError("plant size k must satisfy 1 <= k <= n")
        if not (0 < self.q <= self.p <= 1 and self.q < 1):
            raise ValueError("need 0 < q <= p <= 1 and q < 1")

    @classmethod
    def biclique(cls, n: int, plant) -> "PlantedDistribution":
        if not isinstance(plant, IndexSet):
            plant = IndexSet.of(n, plant)
        return cls(n, plant, Fraction(1), Fraction(1, 2))

    @property
    def k(self) -> int:
        return len(self.plant)

    @property
    def mix_weight(self) -> Fraction:
        return Fraction(self.k, self.n)

    def reference(self) -> ReferenceDistribution:
        return ReferenceDistribution(self.n, self.q)


@dataclass(frozen=True)
class ParityDistribution:
    n: int
    c: IndexSet
    target: int = 1

    def __post_init__(self):
        if self.c.n != self.n:
            raise DimensionMismatch("parity vector lives in a different dimension")
        if len(self.c) == 0:
            raise ValueError("c = 0 gives a constant parity; excluded")
        if self.target not in (-1, 1):
            raise ValueError("target must be -1 or +1")


Distribution = Union[PlantedDistribution, ReferenceDistribution, ParityDistribution]


def _bits_of(dist: Distribution, x) -> int:
    if isinstance(x, Point):
        if x.n != dist.n:
            raise DimensionMismatch(f"point has dimension {x.n}, distribution {dist.n}")
        return x.bits
    x = int(x)
    if x < 0 or x >> dist.n:
        raise DimensionMismatch(f"bit pattern does not fit dimension {dist.n}")
    return x


def _product_mass(q: Fraction, ones: int, zeros: int) -> Fraction:
    return q**ones * (1 - q) ** zeros


def mass(dist: Distribution, x) -> Fraction:
    """Exact probability of the point ``x``."""
    bits = _bits_of(dist, x)
    n = dist.n
    if isinstance(dist, ReferenceDistribution):
        ones = bits.bit_count()
        return _product_mass(dist.q, ones, n - ones)
    if isinstance(dist, PlantedDistribution):
        k, w = dist.k, dist.mix_weight
        ones = bits.bit_count()
        a = (bits & dist.plant.mask).bit_count()
        b = ones - a
        background = _product_mass(dist.q, ones, n - ones)
        planted = _product_mass(dist.p, a, k - a) * _product_mass(dist.q, b, (n - k) - b)
        return (1 - w) * background + w * planted
    if isinstance(dist, ParityDistribution):
        odd = (bits & dist.c.mask).bit_count() & 1
        chi = 1 if odd else -1
        return Fraction(1, 2 ** (n - 1)) if chi == dist.target else Fraction(0)
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


def ratio_deviation(dist: Distribution, ref: ReferenceDistribution, x) -> Fraction:
    """D(x)/R(x) - 1."""
    if dist.n != ref.n:
        raise DimensionMismatch("distribution and reference dimensions differ")
    r = mass(ref, x)
    if r == 0:
        raise ZeroDivisionError("reference mass vanishes at x")
    return mass(dist, x) / r - 1


# ---------------------------------------------------------------------------
# sampling


def draw_many(dist: Distribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent points as an (size, n) uint8 matrix."""
    n = dist.n
    if isinstance(dist, ReferenceDistribution):
        return (rng.random((size, n)) < float(dist.q)).astype(np.uint8)
    if isinstance(dist, PlantedDistribution):
        planted = rng.random(size) < float(dist.mix_weight)
        X = (rng.random((size, n)) < float(dist.q)).astype(np.uint8)
        rows = np.flatnonzero(planted)
        if rows.size:
            cols = np.array(dist.plant.indices)
            X[np.ix_(rows, cols)] = rng.random((rows.size, cols.size)) < float(dist.p)
        return X
    if isinstance(dist, ParityDistribution):
        X = rng.integers(0, 2, size=(size, n), dtype=np.uint8)
        cols = list(dist.c.indices)
        odd = X[:, cols].sum(axis=1) & 1
        want_odd = 1 if dist.target == 1 else 0
        # flipping one coordinate of c is a bijection between the two cosets
        X[odd != want_odd, cols[0]] ^= 1
        return X
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


def draw(dist: Distribution, rng: np.random.Generator) -> Point:
    row = draw_many(dist, rng, 1)[0]
    return Point.from_sequence(row.tolist())


def draw_marginal(dist: Distribution, coords, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws of x restricted to ``coords``, with the exact marginal law of x_coords.

    Product and planted families factor over coordinates given the mixture
    bit, so only the touched coordinates are sampled.
    """
    coords = list(coords)
    if isinstance(dist, ParityDistribution):
        return draw_many(dist, rng, size)[:, coords]
    if isinstance(dist, ReferenceDistribution):
        return (rng.random((size, len(coords))) < float(dist.q)).astype(np.uint8)
    planted = rng.random(size) < float(dist.mix_weight)
    X = (rng.random((size, len(coords))) < float(dist.q)).astype(np.uint8)
    in_plant = [j for j, c in enumerate(coords) if c in dist.plant]
    rows = np.flatnonzero(planted)
    if rows.size and in_plant:
        X[np.ix_(rows, in_plant)] = rng.random((rows.size, len(in_plant))) < float(dist.p)
    return X


# ---------------------------------------------------------------------------
# expectations


def _signed_parity_product(dist, indices) -> Fraction:
    """E[(-1)^(c.x)] for the product-type families."""
    c = set(indices)
    if isinstance(dist, ReferenceDistribution):
        return (1 - 2 * dist.q) ** len(c)
    inside = len(c & set(dist.plant.indices))
    w = dist.mix_weight
    return (1 - w) * (1 - 2 * dist.q) ** len(c) + w * (1 - 2 * dist.p) ** inside * (1 - 2 * dist.q) ** (len(c) - inside)


def exact_expectation(dist: Distribution, query: Query) -> Fraction:
    """Closed-form E_dist[query] for structured queries.

    Tabulated and real-valued queries fall back to enumeration when
    ``dist.n <= 20``.
    """
    if isinstance(query, Constant):
        return as_fraction(query.value)
    if isinstance(dist, (ReferenceDistribution, PlantedDistribution)):
        if isinstance(query, Coordinate):
            if isinstance(dist, PlantedDistribution) and query.index in dist.plant:
                w = dist.mix_weight
                return (1 - w) * dist.q + w * dist.p
            return dist.q
        if isinstance(query, Conjunction):
            t = len(query.indices)
            if isinstance(dist, ReferenceDistribution):
                return dist.q**t
            inside = len(set(query.indices) & set(dist.plant.indices))
            w = dist.mix_weight
            return w * dist.p**inside * dist.q ** (t - inside) + (1 - w) * dist.q**t
        if isinstance(query, Parity):
            chi = -_signed_parity_product(dist, query.indices)
            return Fraction(chi) if query.signed else (1 + chi) / 2
    if isinstance(dist, ParityDistribution):
        c = set(dist.c.indices)
        if isinstance(query, Coordinate):
            if c == {query.index}:
                return Fraction(1) if dist.target == 1 else Fraction(0)
            return Fraction(1, 2)
        if isinstance(query, Conjunction):
            t = set(query.indices)
            if c <= t:
                parity_matches = (len(c) % 2 == 1) == (dist.target == 1)
                return Fraction(2, 2 ** len(t)) if parity_matches else Fraction(0)
            return Fraction(1, 2 ** len(t))
        if isinstance(query, Parity):
            if set(query.indices) == c:
                chi = Fraction(dist.target)
            elif not query.indices:
                chi = Fraction(-1)
            else:
                chi = Fraction(0)
            return chi if query.signed else (1 + chi) / 2
    if dist.n <= MAX_ENUMERATION_N:
        return brute_force_expectation(dist, query)
    raise ValueError(f"no closed form for {query.digest()} and n={dist.n} is too large to enumerate")


@lru_cache(maxsize=64)
def mass_table(dist: Distribution) -> tuple[np.ndarray, int]:
    """Integer numerators of every point's mass and their common denominator.

    Entry ``x`` of the returned array is ``mass(dist, x) * denominator``.  The
    table is built point by point from the mixture definition.
    """
    n = dist.n
    if n > MAX_ENUMERATION_N:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUMERATION_N}")
    xs = np.arange(1 << n, dtype=np.int64)
    ones = popcount_array(xs)
    if isinstance(dist, ParityDistribution):
        odd = popcount_array(xs & dist.c.mask) & 1
        want = 1 if dist.target == 1 else 0
        return (odd == want).astype(np.int64), 1 << (n - 1)
    q = dist.q
    Q1, Qd = q.numerator, q.denominator
    Q0 = Qd - Q1
    if isinstance(dist, ReferenceDistribution):
        table = [Q1**o * Q0 ** (n - o) for o in range(n + 1)]
        den = Qd**n
        return _lookup(table, ones, den), den
    k = dist.k
    p = dist.p
    P1, Pd = p.numerator, p.denominator
    P0 = Pd - P1
    a = popcount_array(xs & dist.plant.mask)
    b = ones - a
    table = [
        [
            (n - k) * Pd**k * Q1 ** (ai + bi) * Q0 ** (n - ai - bi)
            + k * P1**ai * P0 ** (k - ai) * Qd**k * Q1**bi * Q0 ** (n - k - bi)
            for bi in range(n - k + 1)
        ]
        for ai in range(k + 1)
    ]
    den = n * Pd**k * Qd**n
    flat = [v for row in table for v in row]
    return _lookup(flat, a * (n - k + 1) + b, den), den


def _lookup(table: list[int], index: np.ndarray, den: int) -> np.ndarray:
    dtype = np.int64 if den < 2**62 else object
    return np.array(table, dtype=dtype)[index]


def brute_force_expectation(dist: Distribution, query: Query) -> Fraction:
    """Exact sum of query(x) * mass(x) over all 2**n points (n <= 20)."""
    nums, den = mass_table(dist)
    values = query.evaluate_many(all_point_bits(dist.n))
    if values.dtype.kind in "iub" and nums.dtype != object:
        total = int(np.dot(values.astype(np.int64), nums))
        return Fraction(total, den)
    total = Fraction(0)
    for v, m in zip(values.tolist(), nums.tolist()):
        if v and m:
            total += as_fraction(v) * m
    return total / den


def conjunction_expectations(dist: Distribution, subsets: np.ndarray) -> np.ndarray:
    """Float closed-form expectations of the conjunctions given as rows of indices."""
    subsets = np.asarray(subsets)
    s = subsets.shape[1]
    if isinstance(dist, ReferenceDistribution):
        return np.full(subsets.shape[0], float(dist.q) ** s)
    if isinstance(dist, PlantedDistribution):
        in_plant = np.zeros(dist.n, dtype=bool)
        in_plant[list(dist.plant.indices)] = True
        a = in_plant[subsets].sum(axis=1)
        w, p, q = float(dist.mix_weight), float(dist.p), float(dist.q)
        return w * p**a * q ** (s - a) + (1 - w) * q**s
    return np.array([float(exact_expectation(dist, Conjunction(tuple(r)))) for r in subsets])


# ---------------------------------------------------------------------------
# instance files


def _scalar_json(x: Fraction):
    f = float(x)
    return f if as_fraction(f) == x else str(x)


def instance_to_dict(dist: PlantedDistribution, seed: int | None = None) -> dict:
    return {
        "n": dist.n,
        "k": dist.k,
        "plant": dist.plant.to_list(),
        "p": _scalar_json(dist.p),
        "q": _scalar_json(dist.q),
        "seed": seed,
    }


def instance_from_dict(d: dict) -> PlantedDistribution:
    n = int(d["n"])
    plant = IndexSet.of(n, d["plant"])
    if "k" in d and int(d["k"]) != len(plant):
        raise ValueError(f"instance declares k={d['k']} but plant has {len(plant)} indices")
    return PlantedDistribution(n, plant, as_fraction(d.get("p", 1)), as_fraction(d.get("q", "1/2")))


def save_instance(path, dist: PlantedDistribution, seed: int | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(dist, seed), fh, indent=2)
        fh.write("\n")


def load_instance(path) -> tuple[PlantedDistribution, int | None]:
    with open(path) as fh:
        d = json.load(fh)
    return instance_from_dict(d), d.get("seed")
