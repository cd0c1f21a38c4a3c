"""Simulating SAMPLE with VSTAT, and the distances that measure how well it works.

A deterministic adaptive algorithm over m boolean queries is a function from
the bits received so far (a tuple) to the next query.  The SAMPLE law of its
transcript flips a Bernoulli(p) coin per query, p the true expectation; the
simulated law flips Bernoulli(p') with p' a clamped VSTAT answer.  Both laws
are enumerated exactly for m <= 16.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from ._numeric import is_exact
from .distributions import Distribution, exact_expectation
from .oracles import (
    OracleKind,
    OracleSession,
    clamp_vstat,
    vstat_valid_interval,
    within_vstat_tolerance,
)
from .queries import Conjunction, Coordinate, Query, Tabulated

MAX_EXHAUSTIVE_M = 16

Algorithm = Callable[[tuple], Query]
ResponsePolicy = Callable[[Query, object], object]


class NotApplicable(ValueError):
    """The inputs fall outside the hypothesis of the bound being tested."""


def simulation_t(m: int, delta_prime) -> int:
    """ceil(m / delta'^2), the VSTAT parameter that makes the simulation delta'-close."""
    d = Fraction(delta_prime) if is_exact(delta_prime) else Fraction(str(delta_prime))
    if not 0 < d <= Fraction(1, 2):
        raise ValueError("delta' must lie in (0, 1/2]")
    return math.ceil(m / d**2)


def simulate_samples_via_vstat(session: OracleSession, algorithm: Algorithm, m: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Run ``algorithm`` for m steps, replacing each SAMPLE answer by a coin
    with bias equal to the (clamped) VSTAT answer."""
    if session.kind is not OracleKind.VSTAT:
        raise ValueError("the simulation needs a VSTAT session")
    t = session.spec.t
    bits: tuple[int, ...] = ()
    for _ in range(m):
        p = float(clamp_vstat(session.ask(algorithm(bits)), t))
        bits += (int(rng.random() < p),)
    return bits


@dataclass(frozen=True)
class TranscriptDistribution:
    m: int
    probabilities: Mapping[tuple, object]

    def __post_init__(self):
        if any(len(z) != self.m for z in self.probabilities):
            raise ValueError("every transcript must have length m")

    def total(self):
        return sum(self.probabilities.values())

    def __getitem__(self, z):
        return self.probabilities.get(tuple(z), 0)


def transcript_law(m: int, bias: Callable[[tuple], object]) -> TranscriptDistribution:
    """Law of the m coins when coin i has bias ``bias(previous bits)``."""
    if m > MAX_EXHAUSTIVE_M:
        raise ValueError(f"exhaustive enumeration is limited to m <= {MAX_EXHAUSTIVE_M}")
    layer: dict[tuple, object] = {(): Fraction(1)}
    for _ in range(m):
        nxt = {}
        for z, mass in layer.items():
            if mass == 0:
                nxt[z + (0,)] = nxt[z + (1,)] = mass
                continue
            b = bias(z)
            nxt[z + (1,)] = mass * b
            nxt[z + (0,)] = mass * (1 - b)
        layer = nxt
    return TranscriptDistribution(m, layer)


def sample_policy(query: Query, p):
    """The SAMPLE law: the coin's bias is the true expectation."""
    return p


def transcript_distribution(algorithm: Algorithm, m: int, dist: Distribution, policy: ResponsePolicy = sample_policy, t: int | None = None) -> TranscriptDistribution:
    """Exact transcript law of ``algorithm`` on ``dist``.

    ``policy(query, p)`` maps the true expectation to the coin bias; with
    ``t`` set, the bias is clamped to [1/t, 1 - 1/t] as the simulation does.
    Expectations are cached per query.
    """
    cache: dict[Query, object] = {}

    def bias(z):
        q = algorithm(z)
        if q not in cache:
            if not q.boolean:
                raise ValueError(f"{q.digest()} is not a 0/1 query")
            p = exact_expectation(dist, q)
            r = policy(q, p)
            cache[q] = clamp_vstat(r, t) if t is not None else r
        return cache[q]

    return transcript_law(m, bias)


# response policies for VSTAT(t); each returns a legal answer


def exact_policy(t: int) -> ResponsePolicy:
    return lambda q, p: clamp_vstat(p, t)


def band_edge_high_policy(t: int) -> ResponsePolicy:
    return lambda q, p: vstat_valid_interval(p, t)[1]


def band_edge_low_policy(t: int) -> ResponsePolicy:
    return lambda q, p: vstat_valid_interval(p, t)[0]


def adversarial_policy(t: int, ref: Distribution) -> ResponsePolicy:
    """Nearest legal answer to the expectation under ``ref``."""

    def policy(q, p):
        r = exact_expectation(ref, q)
        lo, hi = vstat_valid_interval(p, t)
        if within_vstat_tolerance(r, p, t) and clamp_vstat(r, t) == r:
            return r
        return min(max(r, lo), hi)

    return policy


def _check_same_m(a: TranscriptDistribution, b: TranscriptDistribution):
    if a.m != b.m:
        raise ValueError(f"transcript lengths differ: {a.m} vs {b.m}")


def tv_distance(a: TranscriptDistribution, b: TranscriptDistribution):
    """(1/2) sum_z |a(z) - b(z)|."""
    _check_same_m(a, b)
    keys = set(a.probabilities) | set(b.probabilities)
    return sum(abs(a[z] - b[z]) for z in keys) / 2


def expected_ratio(a: TranscriptDistribution, b: TranscriptDistribution):
    """E_{z ~ a}[a(z) / b(z)], infinite when b misses part of a's support."""
    _check_same_m(a, b)
    total = 0
    for z, pa in a.probabilities.items():
        if pa == 0:
            continue
        pb = b[z]
        if pb == 0:
            return math.inf
        total += pa * pa / pb
    return total


def chi_square(a, b):
    """E_a[a/b] - 1 for two discrete laws given as aligned arrays or transcript laws."""
    if isinstance(a, TranscriptDistribution):
        return expected_ratio(a, b) - 1
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("the second law must be non-vanishing")
    return float(np.sum(a * a / b) - 1)


def tv_from_chi_square_bound(rho) -> float:
    """sqrt(rho) / 2."""
    return math.sqrt(max(float(rho), 0.0)) / 2


def bernoulli_ratio(p, p_prime):
    """E_{b ~ B(p)}[Pr_p(b) / Pr_p'(b)] = 1 + (p - p')^2 / (p'(1 - p'))."""
    if not 0 < p_prime < 1:
        raise ValueError("p' must lie strictly between 0 and 1")
    return 1 + (p - p_prime) ** 2 / (p_prime * (1 - p_prime))


def ratio_bound(t: int):
    """The claimed per-query bound 1 + 2/t."""
    return 1 + Fraction(2, t)


def flip_bound_holds(p, p_prime, t: int) -> bool:
    """Whether |p' - p| >= sqrt(min{p', 1 - p'} / (3t)).

    Raises ``NotApplicable`` unless |p' - p| is at least the VSTAT(t)
    tolerance at p, which is the hypothesis under which the bound is claimed.
    Rational inputs are decided exactly by comparing squares.
    """
    if not (0 <= p <= 1 and 0 <= p_prime <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if not _meets_tolerance(p_prime, p, t):
        raise NotApplicable("|p' - p| is below the VSTAT tolerance at p")
    if is_exact(p) and is_exact(p_prime):
        p, q = Fraction(p), Fraction(p_prime)
        return (q - p) ** 2 * 3 * t >= min(q, 1 - q)
    return abs(float(p_prime) - float(p)) >= math.sqrt(min(float(p_prime), 1 - float(p_prime)) / (3 * t))


def _meets_tolerance(v, p, t) -> bool:
    if is_exact(v) and is_exact(p):
        v, p = Fraction(v), Fraction(p)
        return (v - p) ** 2 >= max(Fraction(1, t * t), p * (1 - p) / t)
    return abs(float(v) - float(p)) >= max(1 / t, math.sqrt(float(p) * (1 - float(p)) / t))


# ---------------------------------------------------------------------------
# the SAMPLE-from-VSTAT check at desk scale


@dataclass
class SimulationDiagnostic:
    m: int
    t: int
    delta_prime: object
    policy: str
    tv: object
    bound: object
    ratio: object
    ratio_bound: object

    @property
    def tv_pass(self) -> bool:
        return self.tv <= self.bound

    @property
    def ratio_pass(self) -> bool:
        return self.ratio <= self.ratio_bound

    @property
    def passed(self) -> bool:
        return self.tv_pass and self.ratio_pass

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "t": self.t,
            "deltaPrime": float(self.delta_prime),
            "policy": self.policy,
            "tv": float(self.tv),
            "bound": float(self.bound),
            "expectedRatio": float(self.ratio),
            "ratioBound": float(self.ratio_bound),
            "pass": self.passed,
        }


def standard_policies(t: int, ref: Distribution | None = None) -> dict[str, ResponsePolicy]:
    pols = {
        "exact": exact_policy(t),
        "band-edge-high": band_edge_high_policy(t),
        "band-edge-low": band_edge_low_policy(t),
    }
    if ref is not None:
        pols["adversarial"] = adversarial_policy(t, ref)
    return pols


def check_simulation(algorithm: Algorithm, m: int, dist: Distribution, delta_prime, policies: Mapping[str, ResponsePolicy] | None = None, ref: Distribution | None = None) -> list[SimulationDiagnostic]:
    """Compare the SAMPLE law with the simulated law under each policy."""
    t = simulation_t(m, delta_prime)
    if policies is None:
        policies = standard_policies(t, ref)
    truth = transcript_distribution(algorithm, m, dist, sample_policy)
    dp = Fraction(delta_prime) if is_exact(delta_prime) else delta_prime
    out = []
    for name, pol in policies.items():
        sim = transcript_distribution(algorithm, m, dist, pol, t=t)
        out.append(
            SimulationDiagnostic(
                m=m,
                t=t,
                delta_prime=dp,
                policy=name,
                tv=tv_distance(truth, sim),
                bound=dp,
                ratio=expected_ratio(truth, sim),
                ratio_bound=ratio_bound(t) ** m,
            )
        )
    return out


def random_adaptive_algorithm(n: int, m: int, rng: np.random.Generator) -> Algorithm:
    """A deterministic query tree of depth m with random node queries.

    Each node asks a coordinate, a conjunction of 2 or 3 coordinates, or a
    random 0/1 truth table (n <= 10).  The tree is drawn up front so the
    algorithm is a fixed function of the bits received.
    """
    tree: dict[tuple, Query] = {}

    def node_query() -> Query:
        kind = int(rng.integers(0, 3 if n <= 10 else 2))
        if kind == 0:
            return Coordinate(int(rng.integers(0, n)))
        if kind == 1:
            size = int(rng.integers(2, min(3, n) + 1))
            return Conjunction(tuple(int(i) for i in rng.choice(n, size=size, replace=False)))
        return Tabulated(n, tuple(int(v) for v in rng.integers(0, 2, size=1 << n)))

    layer = [()]
    for _ in range(m):
        nxt = []
        for z in layer:
            tree[z] = node_query()
            nxt += [z + (0,), z + (1,)]
        layer = nxt
    return lambda z: tree[tuple(z)]
