"""Statistical detection algorithms for planted bicliques and a MAX-XOR-SAT baseline."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .oracles import OracleKind, OracleSession
from .points import IndexSet, Point
from .queries import Coordinate, Parity

DIAGNOSTICS_MAX_N = 64


@dataclass
class DetectionResult:
    recovered: IndexSet
    success: bool
    queries_used: int
    method: str
    responses_by_coordinate: list | None = None
    accepted_subsets: list | None = None

    def to_json(self) -> dict:
        d = {
            "method": self.method,
            "recovered": self.recovered.to_list(),
            "success": self.success,
            "queriesUsed": self.queries_used,
        }
        if self.responses_by_coordinate is not None:
            d["responsesByCoordinate"] = [float(v) for v in self.responses_by_coordinate]
        if self.accepted_subsets is not None:
            d["acceptedSubsets"] = [list(map(int, s)) for s in self.accepted_subsets]
        return d


def coordinate_bias_t(n: int, k: int) -> int:
    """Smallest integer t with t >= 16 n^2 / k^2."""
    return -(-16 * n * n // (k * k))


def subset_enumeration_t(n: int, k: int) -> int:
    return -(-25 * n // k)


def _require_vstat(session: OracleSession):
    if session.kind is not OracleKind.VSTAT:
        raise ValueError(f"expected a VSTAT session, got {session.kind.value}")


def detect_by_coordinate_bias(session: OracleSession, n: int, k: int) -> DetectionResult:
    """Query every coordinate once and keep the k largest answers.

    Ties go to the lower index, so answers that carry no information (all
    equal) yield the first k coordinates.
    """
    _require_vstat(session)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    responses = [session.ask(Coordinate(i)) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-responses[i], i))
    recovered = IndexSet.of(n, order[:k])
    return DetectionResult(
        recovered=recovered,
        success=len(recovered) == k,
        queries_used=n,
        method="coordinate-bias",
        responses_by_coordinate=responses if n <= DIAGNOSTICS_MAX_N else None,
    )


MAX_SUBSETS = 4_000_000


@lru_cache(maxsize=8)
def subsets_of_size(n: int, s: int) -> np.ndarray:
    """All size-s subsets of [n] as a read-only (C(n,s), s) int array, lexicographic."""
    count = math.comb(n, s)
    if count > MAX_SUBSETS:
        raise ValueError(f"C({n},{s}) = {count} subsets exceeds the enumeration cap of {MAX_SUBSETS}")
    dtype = np.int16 if n < 2**15 else np.int64
    arr = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), s)), dtype=dtype, count=count * s)
    arr = arr.reshape(count, s)
    arr.setflags(write=False)
    return arr


def default_subset_size(n: int) -> int:
    return max(1, math.ceil(math.log2(n)))


def detect_by_subset_enumeration(session: OracleSession, n: int, k: int, subset_size: int | None = None) -> DetectionResult:
    """Query the conjunction over every size-s subset and return the union of
    the subsets whose answer exceeds 3k/(4n)."""
    _require_vstat(session)
    s = default_subset_size(n) if subset_size is None else subset_size
    if s < 1:
        raise ValueError("subset size must be at least 1")
    if k < s:
        raise ValueError(f"need k >= subset size, got k={k}, s={s}")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    subsets = subsets_of_size(n, s)
    responses = np.asarray(session.ask_conjunctions(subsets), dtype=float)
    threshold = 3 * k / (4 * n)
    accepted = subsets[responses > threshold]
    union = IndexSet.of(n, np.unique(accepted).tolist()) if len(accepted) else IndexSet(n, ())
    return DetectionResult(
        recovered=union,
        success=len(union) == k,
        queries_used=len(subsets),
        method="subset-enumeration",
        accepted_subsets=accepted.tolist() if n <= DIAGNOSTICS_MAX_N else None,
    )


# ---------------------------------------------------------------------------
# MAX-XOR-SAT


@dataclass
class MaxXorSatResult:
    assignment: Point
    score: object
    queries_used: int
    budget_exhausted: bool
    history: list = field(default_factory=list)

    def satisfied_fraction(self, c: IndexSet) -> Fraction:
        """Exact fraction of clauses from the parity distribution on ``c`` that the assignment satisfies."""
        a = self.assignment.bits
        if a == c.mask:
            return Fraction(1)
        if a == 0:
            return Fraction(0)
        return Fraction(1, 2)

    def to_json(self) -> dict:
        return {
            "assignment": self.assignment.to_string(),
            "score": float(self.score),
            "queriesUsed": self.queries_used,
            "budgetExhausted": self.budget_exhausted,
        }


def solve_max_xor_sat_statistically(
    session: OracleSession,
    n: int,
    query_budget: int,
    rng: np.random.Generator | None = None,
) -> MaxXorSatResult:
    """Baseline solver: per-variable parity queries, then single-bit local
    search scored by the parity query of the current assignment.

    The score of assignment a is E[chi_a(clause)] = 2 Pr[a satisfies] - 1.
    The search stops at a perfect score or when the budget runs out; from a
    local optimum it jumps to a random assignment.  It is expected to fail on
    parity distributions, which is the point of running it.
    """
    if n < 1 or query_budget < 1:
        raise ValueError("need n >= 1 and a positive query budget")
    signed = session.kind is OracleKind.STAT
    rng = rng if rng is not None else np.random.default_rng(0)
    used = 0
    history: list[tuple[int, float]] = []
    cache: dict[int, object] = {}

    def score(bits: int):
        nonlocal used
        if bits in cache:
            return cache[bits]
        if used >= query_budget:
            raise _OutOfBudget
        used += 1
        idx = tuple(i for i in range(n) if bits >> i & 1)
        r = session.ask(Parity(idx, signed=signed))
        v = r if signed else 2 * r - 1
        cache[bits] = v
        history.append((bits, float(v)))
        return v

    perfect = 1 - (session.spec.tau if signed else Fraction(2, session.spec.t) if session.spec.t else 0)
    best_bits, best = 0, None
    exhausted = False
    try:
        # per-variable correlations pick the starting assignment
        start = 0
        for i in range(n):
            if score(1 << i) > 0:
                start |= 1 << i
        current, cur = start, score(start)
        best_bits, best = current, cur
        for i in range(n):
            if cache[1 << i] > best:
                best_bits, best = 1 << i, cache[1 << i]
        while best < perfect:
            improved = False
            for i in range(n):
                cand = current ^ (1 << i)
                v = score(cand)
                if v > cur:
                    current, cur, improved = cand, v, True
                    if v > best:
                        best_bits, best = cand, v
                    break
            if not improved:
                current = int(rng.integers(1, 1 << n)) if n < 63 else int(rng.integers(1, 2**62))
                cur = score(current)
                if cur > best:
                    best_bits, best = current, cur
    except _OutOfBudget:
        exhausted = True
    if best is None:
        best_bits, best = 0, float("nan")
    return MaxXorSatResult(Point(n, best_bits), best, used, exhausted, history)


class _OutOfBudget(Exception):
    pass
