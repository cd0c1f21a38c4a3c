"""STAT, VSTAT and SAMPLE oracles over the distribution families.

An ``OracleSession`` binds an ``OracleSpec`` (which oracle, which parameter)
to a backend that decides the answers:

* ``ExactBackend`` answers with the true expectation (clamped for VSTAT).
* ``HonestBackend`` estimates from fresh draws and meets the oracle's
  tolerance with probability at least 1 - delta.
* ``AdversarialBackend`` answers with the legal value closest to the
  expectation under a reference distribution.  This is one legal VSTAT/STAT
  instantiation; it does not coordinate answers across queries.

Exact arithmetic is used whenever the expectation is rational.  Band edges
involve square roots; they are replaced by a rational at most 2**-64 inside
the band, so every response stays legal.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._numeric import as_fraction, is_exact, sqrt_lower
from .distributions import (
    Distribution,
    ParityDistribution,
    ReferenceDistribution,
    conjunction_expectations,
    draw_many,
    draw_marginal,
    exact_expectation,
)
from .queries import Conjunction, Constant, Coordinate, Parity, Query, RealValued

DEFAULT_SAMPLE_CONSTANT = 9


class OracleKind(str, enum.Enum):
    STAT = "STAT"
    VSTAT = "VSTAT"
    SAMPLE = "SAMPLE"


class NonBooleanQuery(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSpec:
    kind: OracleKind
    tau: Fraction | float | None = None
    t: int | None = None

    def __post_init__(self):
        kind = OracleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is OracleKind.STAT:
            if self.tau is None or self.t is not None:
                raise ValueError("STAT takes exactly a tolerance tau")
            if not self.tau > 0:
                raise ValueError("tau must be positive")
        elif kind is OracleKind.VSTAT:
            if self.t is None or self.tau is not None:
                raise ValueError("VSTAT takes exactly a sample-size parameter t")
            if int(self.t) != self.t or self.t < 1:
                raise ValueError("t must be a positive integer")
            object.__setattr__(self, "t", int(self.t))
        elif self.t is not None or self.tau is not None:
            raise ValueError("SAMPLE takes no parameter")

    @classmethod
    def stat(cls, tau) -> "OracleSpec":
        return cls(OracleKind.STAT, tau=tau)

    @classmethod
    def vstat(cls, t: int) -> "OracleSpec":
        return cls(OracleKind.VSTAT, t=t)

    @classmethod
    def sample(cls) -> "OracleSpec":
        return cls(OracleKind.SAMPLE)


# ---------------------------------------------------------------------------
# tolerance arithmetic


def tolerance_of(t: int, p) -> float:
    """VSTAT(t) tolerance max{1/t, sqrt(p(1-p)/t)} at expectation p."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    p = float(p)
    return max(1.0 / t, math.sqrt(p * (1.0 - p) / t))


def _tolerance_lower(t: int, p):
    """A legal tolerance no larger than the true one (exact when p is rational)."""
    if is_exact(p):
        p = Fraction(p)
        return max(Fraction(1, t), sqrt_lower(p * (1 - p) / t))
    return tolerance_of(t, p)


def within_vstat_tolerance(v, p, t: int) -> bool:
    """|v - p| <= max{1/t, sqrt(p(1-p)/t)}, decided exactly for rationals."""
    if is_exact(v) and is_exact(p):
        v, p = Fraction(v), Fraction(p)
        return (v - p) ** 2 <= max(Fraction(1, t * t), p * (1 - p) / t)
    return abs(float(v) - float(p)) <= tolerance_of(t, p) * (1 + 1e-12)


def clamp_interval(t: int):
    """Responses of VSTAT(t) are kept in [1/t, 1-1/t]; t = 1 collapses to {1/2}."""
    if t >= 2:
        return Fraction(1, t), 1 - Fraction(1, t)
    return Fraction(1, 2), Fraction(1, 2)


def clamp_vstat(v, t: int):
    lo, hi = clamp_interval(t)
    if not is_exact(v):
        return min(max(float(v), float(lo)), float(hi))
    v = Fraction(v)
    return min(max(v, lo), hi)


def vstat_valid_interval(p, t: int):
    """[lo, hi] of legal, clamped VSTAT(t) answers for a query with expectation p."""
    tau = _tolerance_lower(t, p)
    clo, chi = clamp_interval(t)
    if not is_exact(p):
        clo, chi = float(clo), float(chi)
    lo, hi = max(p - tau, clo), min(p + tau, chi)
    if lo > hi:  # only possible through float rounding
        lo = hi = clamp_vstat(p, t)
    return lo, hi


def _project(x, lo, hi):
    return min(max(x, lo), hi)


# ---------------------------------------------------------------------------
# honest estimation


def sample_size_for_vstat(t: int, delta: float, c: float = DEFAULT_SAMPLE_CONSTANT) -> int:
    """Number of draws c * t * ln(1/delta) used to emulate VSTAT(t)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(c * t * math.log(1.0 / float(delta))))


def sample_size_for_stat(tau, delta: float) -> int:
    """Hoeffding count for a [-1, 1]-valued query: 2 ln(2/delta) / tau^2."""
    return max(1, math.ceil(2.0 * math.log(2.0 / float(delta)) / float(tau) ** 2))


def _localize(query: Query):
    """Re-index a structured query onto its own support (for marginal draws)."""
    sup = query.support
    if sup is None:
        return None, None
    local = tuple(range(len(sup)))
    if isinstance(query, Coordinate):
        return Coordinate(0), sup
    if isinstance(query, Conjunction):
        return Conjunction(local), sup
    if isinstance(query, Parity):
        return Parity(local, signed=query.signed), sup
    if isinstance(query, Constant):
        return query, sup
    return None, None


def _draw_values(dist: Distribution, query: Query, rng: np.random.Generator, size: int) -> np.ndarray:
    local, sup = _localize(query)
    if local is not None and not isinstance(dist, ParityDistribution):
        X = draw_marginal(dist, sup, rng, size) if sup else np.zeros((size, 0), dtype=np.uint8)
        return local.evaluate_many(X)
    return query.evaluate_many(draw_many(dist, rng, size))


def _mean(values: np.ndarray):
    if values.dtype.kind in "iub":
        return Fraction(int(values.sum()), len(values))
    return float(np.mean(values.astype(float)))


def estimate_from_samples(
    dist: Distribution,
    query: Query,
    t: int,
    delta: float,
    rng: np.random.Generator,
    c: float = DEFAULT_SAMPLE_CONSTANT,
):
    """Average of ``query`` over c*t*ln(1/delta) fresh draws."""
    if not query.boolean:
        raise NonBooleanQuery(f"{query.digest()} is not {{0,1}}-valued")
    size = sample_size_for_vstat(t, delta, c)
    return _mean(_draw_values(dist, query, rng, size))


# ---------------------------------------------------------------------------
# backends


class ExactBackend:
    def __init__(self, dist: Distribution):
        self.dist = dist
        self.draws = 0

    def expectation(self, query: Query):
        return exact_expectation(self.dist, query)

    def stat(self, query, tau):
        return self.expectation(query)

    def vstat(self, query, t):
        return clamp_vstat(self.expectation(query), t)

    def vstat_conjunctions(self, subsets, t):
        lo, hi = clamp_interval(t)
        return np.clip(conjunction_expectations(self.dist, subsets), float(lo), float(hi))

    def sample(self, query):
        raise TypeError("SAMPLE needs a backend that draws points (use HonestBackend)")


class AdversarialBackend:
    """Answers with the legal value nearest to the reference expectation."""

    def __init__(self, dist: Distribution, ref: Distribution):
        if ref.n != dist.n:
            raise ValueError("reference distribution must live on the same domain")
        self.dist = dist
        self.ref = ref
        self.draws = 0

    def expectation(self, query: Query):
        return exact_expectation(self.dist, query)

    def stat(self, query, tau):
        e = self.expectation(query)
        r = exact_expectation(self.ref, query)
        if is_exact(tau):
            tau = Fraction(tau)
        else:
            e, r = float(e), float(r)
        return _project(r, e - tau, e + tau)

    def vstat(self, query, t):
        e = self.expectation(query)
        r = exact_expectation(self.ref, query)
        clo, chi = clamp_interval(t)
        if within_vstat_tolerance(r, e, t) and clo <= r <= chi:
            return r
        lo, hi = vstat_valid_interval(e, t)
        return _project(r, lo, hi)

    def vstat_conjunctions(self, subsets, t):
        e = conjunction_expectations(self.dist, subsets)
        r = conjunction_expectations(self.ref, subsets)
        tau = np.maximum(1.0 / t, np.sqrt(e * (1 - e) / t))
        clo, chi = (float(v) for v in clamp_interval(t))
        lo = np.maximum(e - tau, clo)
        hi = np.minimum(e + tau, chi)
        return np.clip(r, lo, hi)

    def sample(self, query):
        raise TypeError("SAMPLE needs a backend that draws points (use HonestBackend)")


class HonestBackend:
    """Answers from fresh samples; fails its contract with probability <= delta."""

    def __init__(self, dist: Distribution, rng: np.random.Generator, delta: float = 0.01, c: float = DEFAULT_SAMPLE_CONSTANT):
        self.dist = dist
        self.rng = rng
        self.delta = delta
        self.c = c
        self.draws = 0

    def expectation(self, query: Query):
        try:
            return exact_expectation(self.dist, query)
        except ValueError:
            return None

    def vstat(self, query, t):
        size = sample_size_for_vstat(t, self.delta, self.c)
        self.draws += size
        return clamp_vstat(_mean(_draw_values(self.dist, query, self.rng, size)), t)

    def stat(self, query, tau):
        size = sample_size_for_stat(tau, self.delta)
        self.draws += size
        return _mean(_draw_values(self.dist, query, self.rng, size))

    def vstat_conjunctions(self, subsets, t):
        return np.array([float(self.vstat(Conjunction(tuple(r)), t)) for r in np.asarray(subsets)])

    def sample(self, query):
        self.draws += 1
        v = _draw_values(self.dist, query, self.rng, 1)[0]
        return int(v) if isinstance(v, (np.integer, int)) else v


Backend = ExactBackend | AdversarialBackend | HonestBackend


# ---------------------------------------------------------------------------
# sessions


def _json_number(v):
    if v is None:
        return None
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return float(v)


@dataclass
class TranscriptRecord:
    index: int
    kind: str
    query_digest: str
    response: object
    true_expectation: object = None
    tolerance_used: float | None = None

    def to_json(self) -> dict:
        d = {
            "index": self.index,
            "kind": self.kind,
            "queryDigest": self.query_digest,
            "response": _json_number(self.response),
        }
        if isinstance(self.response, Fraction):
            d["responseExact"] = str(self.response)
        if self.true_expectation is not None:
            d["trueExpectation"] = _json_number(self.true_expectation)
        if self.tolerance_used is not None:
            d["toleranceUsed"] = float(self.tolerance_used)
        return d


@dataclass
class OracleSession:
    spec: OracleSpec
    backend: Backend
    record: bool = True
    sample_budget: int | None = None
    transcript: list[TranscriptRecord] = field(default_factory=list)
    query_count: int = 0
    sample_count: int = 0

    @property
    def kind(self) -> OracleKind:
        return self.spec.kind

    @property
    def dist(self) -> Distribution:
        return self.backend.dist

    def _check_budget(self, needed: int):
        if self.sample_budget is not None and self.sample_count + needed > self.sample_budget:
            raise BudgetExhausted(f"sample budget {self.sample_budget} exhausted")

    def ask(self, query: Query):
        kind = self.spec.kind
        if kind is not OracleKind.STAT and not query.boolean:
            raise NonBooleanQuery(f"{kind.value} accepts only {{0,1}}-valued queries, got {query.digest()}")
        before = self.backend.draws
        if kind is OracleKind.SAMPLE:
            self._check_budget(1)
            response = self.backend.sample(query)
            tol = None
        elif kind is OracleKind.VSTAT:
            if isinstance(self.backend, HonestBackend):
                self._check_budget(sample_size_for_vstat(self.spec.t, self.backend.delta, self.backend.c))
            response = self.backend.vstat(query, self.spec.t)
            tol = None
        else:
            if isinstance(self.backend, HonestBackend):
                self._check_budget(sample_size_for_stat(self.spec.tau, self.backend.delta))
            response = self.backend.stat(query, self.spec.tau)
            tol = float(self.spec.tau)
        self.sample_count += self.backend.draws - before
        self.query_count += 1
        if self.record:
            truth = None
            if not isinstance(query, RealValued) or self.dist.n <= 12:
                try:
                    truth = self.backend.expectation(query)
                except ValueError:
                    truth = None
            if kind is OracleKind.VSTAT and truth is not None:
                tol = tolerance_of(self.spec.t, truth)
            self.transcript.append(
                TranscriptRecord(len(self.transcript), kind.value, query.digest(), response, truth, tol)
            )
        return response

    def ask_conjunctions(self, subsets) -> np.ndarray:
        """Batch of VSTAT conjunction queries, one per row of ``subsets`` (float mode)."""
        if self.spec.kind is not OracleKind.VSTAT:
            raise ValueError("batched conjunctions are VSTAT-only")
        subsets = np.asarray(subsets)
        before = self.backend.draws
        responses = self.backend.vstat_conjunctions(subsets, self.spec.t)
        self.sample_count += self.backend.draws - before
        self.query_count += len(subsets)
        if self.record:
            base = len(self.transcript)
            for i, (row, v) in enumerate(zip(subsets, responses)):
                q = Conjunction(tuple(int(j) for j in row))
                self.transcript.append(TranscriptRecord(base + i, "VSTAT", q.digest(), float(v)))
        return responses

    def responses(self) -> list[tuple[str, object]]:
        return [(r.query_digest, r.response) for r in self.transcript]

    def export_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.transcript:
                fh.write(json.dumps(rec.to_json()) + "\n")


def make_session(kind, dist, backend: str = "exact", *, t=None, tau=None, ref=None, rng=None, delta=0.01, record=True) -> OracleSession:
    """Convenience constructor used by the CLI and the tests."""
    kind = OracleKind(kind)
    spec = {OracleKind.STAT: lambda: OracleSpec.stat(tau), OracleKind.VSTAT: lambda: OracleSpec.vstat(t), OracleKind.SAMPLE: OracleSpec.sample}[kind]()
    if backend == "exact":
        be = ExactBackend(dist)
    elif backend == "adversarial":
        if ref is None:
            ref = dist.reference() if hasattr(dist, "reference") else ReferenceDistribution(dist.n, Fraction(1, 2))
        be = AdversarialBackend(dist, ref)
    elif backend == "honest":
        if rng is None:
            raise ValueError("the honest backend needs a random generator")
        be = HonestBackend(dist, rng, delta)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return OracleSession(spec, be, record=record)


# ---------------------------------------------------------------------------
# real-valued queries through boolean ones


def bits_needed(tau) -> int:
    """ceil(log2(1/tau)) + 2."""
    tau = as_fraction(tau) if not isinstance(tau, float) else Fraction(tau)
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    # ceil(log2(1/tau)) without floating point: smallest e with 2**e >= 1/tau
    inv = 1 / tau
    e = 0
    while 2**e < inv:
        e += 1
    return e + 2


def _bit_of_shifted(value, j: int, nbits: int) -> int:
    v = as_fraction(value) + 1
    top = 2 - Fraction(1, 2 ** (nbits - 1))
    v = min(max(v, Fraction(0)), top)
    return math.floor(v * 2**j) & 1


def decompose_real_query(query: Query, tau) -> list[RealValued]:
    """Boolean queries whose j-th member computes bit j of 1 + h(x) in [0, 2].

    Bit 0 is the units place; bit j has weight 2**-j.
    """
    nbits = bits_needed(tau)
    label = query.digest()
    out = []
    for j in range(nbits):
        out.append(
            RealValued(
                fn=lambda x, j=j: _bit_of_shifted(query(x), j, nbits),
                label=f"{label}#bit{j}/{nbits}",
                boolean_range=True,
            )
        )
    return out


def recombine_bits(bits) -> Fraction | float:
    """Inverse of ``decompose_real_query``: sum_j 2**-j b_j - 1."""
    exact = all(is_exact(b) for b in bits)
    total = sum((Fraction(b) if exact else float(b)) * (Fraction(1, 2**j) if exact else 2.0**-j) for j, b in enumerate(bits))
    return total - 1
