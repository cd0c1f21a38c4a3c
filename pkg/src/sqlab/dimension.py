"""Correlations between planted distributions and the dimension calculators built on them.

Correlations are inner products of ratio deviations under the reference
product distribution.  For the planted family they depend only on the overlap
of the two plants, which gives a closed form; the brute-force routines here
recompute them from point masses so the closed form can be checked.

The calculators evaluate the lower-bound formulas for the specific witness
families in this package.  Maximizing over all reference distributions, as
the general definitions do, is not attempted.  Values are exact rationals
whenever the inputs allow; n**(2*l*delta) with a non-integer exponent is a
float.  Vacuous regimes (dimension below 1, zero correlation) come back with
a flag rather than an error.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from ._numeric import as_fraction, icbrt, is_exact
from .distributions import (
    ParityDistribution,
    PlantedDistribution,
    ReferenceDistribution,
    mass_table,
)
from .points import IndexSet, popcount_array


class ParameterError(ValueError):
    pass


def _frac(x):
    return x if isinstance(x, Fraction) else as_fraction(x)


# ---------------------------------------------------------------------------
# closed forms


def overlap_class_size(n: int, k: int, lam: int) -> int:
    """Number of k-subsets meeting a fixed k-subset in exactly ``lam`` indices."""
    if not 0 <= lam <= k <= n:
        raise ParameterError(f"need 0 <= lambda <= k <= n, got ({lam}, {k}, {n})")
    return math.comb(k, lam) * math.comb(n - k, k - lam)


def correlation_base(p, q) -> Fraction:
    """1 + (p - q)^2 / (q (1 - q))."""
    p, q = _frac(p), _frac(q)
    return 1 + (p - q) ** 2 / (q * (1 - q))


def pairwise_correlation(n: int, k: int, lam: int, p=1, q=Fraction(1, 2)) -> Fraction:
    """Correlation of two planted distributions whose plants share ``lam`` indices:
    ((1 + (p-q)^2/(q(1-q)))^lam - 1) k^2 / n^2."""
    p, q = _frac(p), _frac(q)
    if not (0 < q <= p <= 1):
        raise ParameterError("need 0 < q <= p <= 1")
    if not 0 <= lam <= k <= n:
        raise ParameterError(f"need 0 <= lambda <= k <= n, got ({lam}, {k}, {n})")
    return (correlation_base(p, q) ** lam - 1) * Fraction(k * k, n * n)


def clique_correlation_bound(n: int, k: int, lam: int) -> Fraction:
    """2^lam k^2 / n^2."""
    return Fraction(2**lam * k * k, n * n)


@dataclass(frozen=True)
class CorrelationRecord:
    overlap: int
    exact_value: Fraction
    clique_bound: Fraction

    def to_json(self) -> dict:
        return {"overlap": self.overlap, "exactValue": str(self.exact_value), "cliqueBound": str(self.clique_bound)}


def correlation_records(n: int, k: int, p=1, q=Fraction(1, 2)) -> list[CorrelationRecord]:
    return [CorrelationRecord(lam, pairwise_correlation(n, k, lam, p, q), clique_correlation_bound(n, k, lam)) for lam in range(k + 1)]


def average_correlation(supports, n: int, k: int, p=1, q=Fraction(1, 2), reference_support: IndexSet | None = None) -> Fraction:
    """Mean absolute correlation over all ordered pairs of ``supports``, or,
    with ``reference_support``, the mean correlation of that one plant against
    each member of ``supports``.  Uses the closed form only."""
    supports = list(supports)
    if not supports:
        raise ParameterError("need at least one support")
    for s in supports:
        if len(s) != k or s.n != n:
            raise ParameterError("all supports must be k-subsets of [n]")
    table = [pairwise_correlation(n, k, lam, p, q) for lam in range(k + 1)]
    if reference_support is not None:
        total = sum(table[reference_support.overlap(s)] for s in supports)
        return total / len(supports)
    total = Fraction(0)
    for a in supports:
        for b in supports:
            total += abs(table[a.overlap(b)])
    return total / (len(supports) ** 2)


# ---------------------------------------------------------------------------
# brute force


def all_supports(n: int, k: int) -> np.ndarray:
    """Bit masks of every k-subset of [n], in lexicographic order of index tuples."""
    from itertools import combinations

    return np.array([sum(1 << i for i in c) for c in combinations(range(n), k)], dtype=np.int64)


def _deviation_rows(n: int, k: int, masks: np.ndarray, p, q):
    """Integer matrix W with W[i, x] proportional to D_i(x) - D(x).

    The point masses come from ``mass_table`` of the plant {0..k-1}.  Masses
    of a planted distribution depend only on how many ones a point has inside
    and outside the plant, so the other plants reuse that table by lookup.
    Returns ``(W, unit, peak, rnum, rden)`` with D_i(x) - D(x) = W[i, x] * unit
    and peak the largest |W| entry.
    """
    num, den = mass_table(PlantedDistribution(n, IndexSet(n, tuple(range(k))), p, q))
    rnum, rden = mass_table(ReferenceDistribution(n, q))
    width = n - k + 1
    values = []
    for a in range(k + 1):
        for b in range(width):
            x = ((1 << a) - 1) | (((1 << b) - 1) << k)
            values.append(int(num[x]) * rden - int(rnum[x]) * den)
    g = reduce(math.gcd, values, 0) or 1
    reduced = [v // g for v in values]
    peak = max(abs(v) for v in reduced)
    xs = np.arange(1 << n, dtype=np.int64)
    ones = popcount_array(xs)
    table = np.array(reduced, dtype=np.int64 if peak < 2**62 else object)
    W = np.empty((len(masks), 1 << n), dtype=table.dtype)
    for i, mask in enumerate(masks):
        a = popcount_array(xs & int(mask))
        W[i] = table[a * width + (ones - a)]
    return W, Fraction(g, den * rden), peak, rnum, rden


def brute_force_correlation_matrix(n: int, k: int, p=1, q=Fraction(1, 2), masks: np.ndarray | None = None):
    """Exact correlation of every pair of planted distributions, from point masses.

    Returns ``(masks, G, scale)`` with the correlation of supports i and j
    equal to ``G[i, j] * scale``; G is an integer (or object) array.  With
    q = 1/2 the reference mass is constant, and the Gram matrix is computed
    in float64 when every partial sum is an integer below 2**53, which keeps
    it exact.
    """
    p, q = _frac(p), _frac(q)
    if masks is None:
        masks = all_supports(n, k)
    W, unit, peak, rnum, rden = _deviation_rows(n, k, masks, p, q)
    if q == Fraction(1, 2):
        # sum_x (D_i - D)(D_j - D) / D(x), with D(x) = 1 / 2^n
        scale = unit * unit * (1 << n)
        if peak * peak * (1 << n) < 2**53:
            Wf = W.astype(np.float64)
            G = np.rint(Wf @ Wf.T).astype(np.int64)
        elif peak * peak * (1 << n) < 2**62:
            G = W @ W.T
        else:
            Wo = W.astype(object)
            G = Wo.dot(Wo.T)
        return masks, G, scale
    # general q: weight each point by lcm / rnum(x) to stay in integers
    rn = [int(v) for v in rnum]
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), set(rn), 1)
    weights = np.array([lcm // v for v in rn], dtype=object)
    Wo = W.astype(object)
    G = (Wo * weights).dot(Wo.T)
    scale = unit * unit * rden / lcm
    return masks, G, scale


def check_correlations_against_brute_force(n: int, k: int, p=1, q=Fraction(1, 2)) -> dict:
    """Compare every pairwise correlation with the closed form, exactly.

    Also checks the clique bound 2^lam k^2 / n^2 when p = 1, q = 1/2.
    """
    p, q = _frac(p), _frac(q)
    masks, G, scale = brute_force_correlation_matrix(n, k, p, q)
    overlap = popcount_array(masks[:, None] & masks[None, :])
    mismatches = 0
    bound_violations = 0
    for lam in range(k + 1):
        sel = overlap == lam
        if not sel.any():
            continue
        target = pairwise_correlation(n, k, lam, p, q) / scale
        vals = G[sel]
        if target.denominator != 1:
            mismatches += int(sel.sum())
            continue
        mismatches += int(np.count_nonzero(vals != int(target)))
        if p == 1 and q == Fraction(1, 2) and pairwise_correlation(n, k, lam, p, q) > clique_correlation_bound(n, k, lam):
            bound_violations += int(sel.sum())
    return {
        "n": n,
        "k": k,
        "p": str(p),
        "q": str(q),
        "pairs": int(len(masks) ** 2),
        "mismatches": mismatches,
        "boundViolations": bound_violations,
        "pass": mismatches == 0 and bound_violations == 0,
    }


# ---------------------------------------------------------------------------
# average-correlation bound, worst case by overlap


def max_delta(n: int, k: int) -> float:
    """Largest delta with k <= n^(1/2 - delta)."""
    return 0.5 - math.log(k) / math.log(n)


def _n_power(n: int, exponent):
    """n**exponent, exact when the result is rational (integer exponent or perfect root)."""
    e = _frac(exponent) if not isinstance(exponent, float) else Fraction(repr(exponent))
    if e.denominator == 1:
        return Fraction(n) ** int(e)
    if e.denominator <= 64:
        root = round(n ** (1.0 / e.denominator))
        for r in (root - 1, root, root + 1):
            if r > 0 and r**e.denominator == n:
                return Fraction(r) ** e.numerator
    return float(n) ** float(e)


def greedy_worst_case_average(n: int, k: int, ell: int, delta) -> dict:
    """One-vs-set average correlation for the worst set A of the required size.

    A holds the fixed plant S, then whole overlap classes in decreasing
    overlap (k-1, k-2, ...), cut off once |A| reaches 4(m-1)/n^(2 l delta)
    with m = C(n, k).  Only class sizes are needed, so nothing is enumerated.
    """
    m = math.comb(n, k)
    size = max(1, math.ceil(4 * (m - 1) / float(_n_power(n, 2 * ell * _frac(delta)))))
    size = min(size, m)
    table = [pairwise_correlation(n, k, lam, 1, Fraction(1, 2)) for lam in range(k + 1)]
    remaining = size
    total = Fraction(0)
    for lam in range(k, -1, -1):
        take = min(remaining, overlap_class_size(n, k, lam))
        total += take * table[lam]
        remaining -= take
        if remaining == 0:
            break
    average = total / size
    bound = Fraction(2 ** (ell + 2) * k * k, n * n)
    return {"n": n, "k": k, "ell": ell, "delta": float(delta), "setSize": size, "average": average, "bound": bound, "pass": average < bound}


def delta_grid(n: int, k: int, points: int = 20) -> list[float]:
    """``points`` evenly spaced deltas in (0, max_delta]; empty when no delta is valid."""
    top = max_delta(n, k)
    if top <= 0:
        return []
    return [top * (i + 1) / points for i in range(points)]


def overlap_ratio_holds(n: int, k: int, j: int, delta) -> bool:
    """|T_j| / |T_{j+1}| >= (j+1) n^(2 delta) / 2."""
    lhs = Fraction(overlap_class_size(n, k, j), overlap_class_size(n, k, j + 1))
    return float(lhs) >= (j + 1) * float(_n_power(n, 2 * _frac(delta))) / 2 * (1 - 1e-12)


# ---------------------------------------------------------------------------
# calculators


@dataclass
class DimensionEstimate:
    gamma_bar: object
    d: object
    eta: object
    vstat_param: object
    query_bound: int
    sample_bound: int
    params: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def num(v):
            if isinstance(v, Fraction):
                return float(v)
            return v

        return {
            **{k: num(v) for k, v in self.params.items()},
            "gammaBar": num(self.gamma_bar),
            "d": num(self.d),
            "eta": num(self.eta),
            "vstatParam": num(self.vstat_param),
            "queryBound": self.query_bound,
            "sampleBound": self.sample_bound,
            "flags": list(self.flags),
            **{k: num(v) for k, v in self.extras.items()},
        }


CSV_COLUMNS = ["n", "k", "p", "q", "delta", "ell", "gammaBar", "d", "eta", "vstatParam", "queryBound", "sampleBound", "flags"]


def dimension_table_csv(estimates) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in estimates:
        js = e.to_json()
        w.writerow([js.get(c, "") if c != "flags" else ";".join(e.flags) for c in CSV_COLUMNS])
    return buf.getvalue()


def query_lower_bound(d, gamma_bar, success_prob, eta):
    """(delta - eta)/(1 - eta) * d calls to VSTAT(1/(3 gamma_bar))."""
    if not success_prob > eta:
        raise ParameterError("success probability must exceed eta")
    return (success_prob - eta) / (1 - eta) * d


def sample_lower_bound(d, gamma_bar, success_prob, eta):
    """min{ d(delta - eta) / (2(1 - eta)), (delta - eta)^2 / (12 gamma_bar) }."""
    if not success_prob > eta:
        raise ParameterError("success probability must exceed eta")
    a = d * (success_prob - eta) / (2 * (1 - eta))
    if gamma_bar == 0:
        return a
    b = (success_prob - eta) ** 2 / (12 * gamma_bar)
    return min(a, b)


def simplified_sample_lower_bound(d, gamma_bar):
    """min{d/4, 1/(48 gamma_bar)}, the delta = 2/3, eta = 1/6 specialisation."""
    return min(d / 4, 1 / (48 * gamma_bar))


def _floor(x) -> int:
    return math.floor(x) if math.isfinite(float(x)) else 0


def _estimate(gamma_bar, d, eta, success_prob, params, flags, extras=None) -> DimensionEstimate:
    vstat = 1 / (3 * gamma_bar) if gamma_bar else math.inf
    if d < 1:
        flags.append("vacuous-dimension")
    if gamma_bar == 0:
        flags.append("zero-correlation")
    qb = query_lower_bound(d, gamma_bar, success_prob, eta)
    sb = sample_lower_bound(d, gamma_bar, success_prob, eta)
    return DimensionEstimate(gamma_bar, d, eta, vstat, _floor(qb), _floor(sb), params, flags, extras or {})


def _check_common(n, k, delta, ell):
    if not 1 <= k <= n:
        raise ParameterError("need 1 <= k <= n")
    if not 1 <= ell <= k:
        raise ParameterError("need 1 <= l <= k")
    if not 0 < float(delta) < 0.5:
        raise ParameterError("delta must lie in (0, 1/2)")
    if k > float(n) ** (0.5 - float(delta)) * (1 + 1e-12):
        raise ParameterError(f"k={k} exceeds n^(1/2 - delta)")


def sda_clique_bound(n: int, k: int, delta, ell: int, success_prob=Fraction(2, 3)) -> DimensionEstimate:
    """gamma_bar = 2^(l+2) k^2/n^2, d = n^(2 l delta)/4, eta = 1/C(n,k)."""
    _check_common(n, k, delta, ell)
    gamma_bar = Fraction(2 ** (ell + 2) * k * k, n * n)
    d = _n_power(n, 2 * ell * _frac(delta)) / 4
    eta = Fraction(1, math.comb(n, k))
    params = {"n": n, "k": k, "p": 1, "q": 0.5, "delta": float(delta), "ell": ell}
    return _estimate(gamma_bar, d, eta, success_prob, params, [])


def dense_subgraph_sda_bound(n: int, k: int, delta, ell: int, p, q, success_prob=Fraction(2, 3)) -> DimensionEstimate:
    """gamma_bar = (2k^2/n^2)((1 + (p-q)^2/(q(1-q)))^(l+1) - 1), d = n^(2 l delta)/4.

    Extras: the VSTAT parameter n^2 r^-(l+1) / k^2, and for q = 1/2 the
    p = 1/2 + alpha forms n^2/(l alpha^2 k^2) and n^(2+2c)/k^2 with
    alpha = n^-c; at p = 1, q = 1/2 the factors 2(2^(l+1) - 1) and 2^(l+2)
    that compare it with the clique bound.
    """
    _check_common(n, k, delta, ell)
    p, q = _frac(p), _frac(q)
    if not 0 < q <= p <= 1 or q >= 1:
        raise ParameterError("need 0 < q <= p <= 1, q < 1")
    r = correlation_base(p, q)
    if float(_n_power(n, 2 * _frac(delta))) < float(r) * (1 - 1e-12):
        raise ParameterError("proviso n^(2 delta) >= 1 + (p-q)^2/(q(1-q)) fails")
    gamma_bar = Fraction(2 * k * k, n * n) * (r ** (ell + 1) - 1)
    d = _n_power(n, 2 * ell * _frac(delta)) / 4
    eta = Fraction(1, math.comb(n, k))
    extras: dict = {"correlationBase": r, "vstatParamSimplified": Fraction(n * n, k * k) / r ** (ell + 1)}
    if q == Fraction(1, 2) and p > q:
        alpha = p - q
        extras["vstatParamSmallBias"] = Fraction(n * n) / (ell * alpha * alpha * k * k)
        c = -math.log(float(alpha)) / math.log(n)
        extras["biasExponent"] = c
        extras["sampleBoundSmallBias"] = float(n) ** (2 + 2 * c) / (k * k)
    if p == 1 and q == Fraction(1, 2):
        extras["denseFactor"] = 2 * (2 ** (ell + 1) - 1)
        extras["cliqueFactor"] = 2 ** (ell + 2)
    params = {"n": n, "k": k, "p": float(p), "q": float(q), "delta": float(delta), "ell": ell}
    return _estimate(gamma_bar, d, eta, success_prob, params, [], extras)


def stat_lower_bound_from_sd(m, gamma, beta, tau):
    """m(tau^2 - gamma)/(beta - gamma) calls to STAT(tau)."""
    if not beta > gamma >= 0:
        raise ParameterError("need beta > gamma >= 0")
    if not tau * tau > gamma:
        raise ParameterError("need tau^2 > gamma")
    return m * (tau * tau - gamma) / (beta - gamma)


def _cube_root(m):
    if is_exact(m) and Fraction(m).denominator == 1:
        r = icbrt(int(m))
        if r is not None:
            return Fraction(r)
    return float(m) ** (1.0 / 3.0)


def stat_lower_bound_simplified(m):
    """m^(1/3)/2 calls of tolerance m^(-1/3), with gamma = m^(-2/3)/2 and beta = 1.

    Returns ``(bound, gamma, tau)``; the general formula at these inputs is
    never smaller than the bound.
    """
    c = _cube_root(m)
    return c / 2, 1 / (2 * c * c), 1 / c


def sd_to_sda(m, gamma, beta, gamma_prime):
    """m(gamma' - gamma)/(beta - gamma)."""
    if not gamma_prime > gamma:
        raise ParameterError("need gamma' > gamma")
    if not beta > gamma:
        raise ParameterError("need beta > gamma")
    return m * (gamma_prime - gamma) / (beta - gamma)


@dataclass(frozen=True)
class BridgeRecord:
    d_prime: int
    sd_lower_bound: object
    query_bound: object
    randomized_query_bound: object
    vacuous: bool

    def to_json(self) -> dict:
        return {
            "dPrime": self.d_prime,
            "sdLowerBound": float(self.sd_lower_bound),
            "queryBound": float(self.query_bound),
            "randomizedQueryBound": float(self.randomized_query_bound),
            "vacuous": self.vacuous,
        }


def sqdim_bridge(d_prime) -> BridgeRecord:
    """d' - 1/(d'^(-2/3) - 1/d'), d'^(1/3) - 2 and d'^(1/3)/2 - 2."""
    if d_prime < 2:
        raise ParameterError("need d' >= 2")
    c = _cube_root(d_prime)
    dp = Fraction(d_prime) if isinstance(c, Fraction) else float(d_prime)
    sd = dp - 1 / (1 / (c * c) - 1 / dp)
    qb = c - 2
    rqb = c / 2 - 2
    return BridgeRecord(d_prime, sd, qb, rqb, vacuous=sd < 1 or qb <= 0)


# ---------------------------------------------------------------------------
# parity family


def parity_family_check(n: int) -> dict:
    """Exhaustive check over all nonzero c, c' in {0,1}^n:

    E_{x ~ D_c}[chi_c'(x)] is 1 when c = c' and 0 otherwise, and
    E_{x ~ U}[chi_c(x) chi_c'(x)] is the identity matrix.  The ratio
    deviation of D_c against uniform is chi_c itself, so the second matrix
    is also the pairwise-correlation matrix of the 2^n - 1 distributions.
    """
    if not 1 <= n <= 12:
        raise ParameterError("parity check is limited to 1 <= n <= 12")
    size = 1 << n
    xs = np.arange(size, dtype=np.int64)
    cs = xs[1:]
    odd = popcount_array(cs[:, None] & xs[None, :]) & 1
    chi = (2 * odd - 1).astype(np.float64)  # chi[c, x] = +1 when c.x is odd
    # D_c from the package's own mass table, in units of 2^-(n-1)
    dc = np.array([mass_table(ParityDistribution(n, IndexSet(n, tuple(i for i in range(n) if c >> i & 1)), 1))[0] for c in cs], dtype=np.float64)
    part1 = dc @ chi.T  # times 2^(n-1)
    part2 = chi @ chi.T  # times 2^n
    ident = np.eye(len(cs))
    ok1 = np.array_equal(part1, ident * (size // 2))
    ok2 = np.array_equal(part2, ident * size)
    # ratio deviations computed from masses: D_c / U - 1 = 2^n D_c(x) - 1
    dev = 2 * dc - 1
    corr_ok = np.array_equal(dev, chi)
    return {
        "n": n,
        "families": len(cs),
        "part1": ok1,
        "part2": ok2,
        "deviationIsParity": corr_ok,
        "sdLowerBound": len(cs) if (ok1 and ok2 and corr_ok) else None,
        "pass": ok1 and ok2 and corr_ok,
    }
