"""Self-check suites: exact and seeded property checks over the whole package.

Each check returns a ``CheckResult``; a suite is a list of them.  The CLI's
``verify`` command and the acceptance tests both run these.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algorithms import detect_by_coordinate_bias
from .dimension import (
    check_correlations_against_brute_force,
    delta_grid,
    greedy_worst_case_average,
    overlap_ratio_holds,
    parity_family_check,
)
from .distributions import (
    ParityDistribution,
    PlantedDistribution,
    ReferenceDistribution,
    brute_force_expectation,
    exact_expectation,
    mass_table,
)
from .oracles import (
    estimate_from_samples,
    make_session,
    tolerance_of,
    vstat_valid_interval,
    within_vstat_tolerance,
)
from .points import IndexSet
from .queries import Conjunction, Coordinate, Parity
from .reductions import (
    chernoff_window_bound,
    generate_average_instance,
    generate_sample_matrix,
    ground_truth_average_solver,
    ground_truth_distributional_solver,
    permute_columns,
    replacement_sequence,
    solve_average_via_distributional_solver,
    solve_distributional_via_average_solver,
)
from .rng import make_rng
from .simulation import (
    NotApplicable,
    bernoulli_ratio,
    check_simulation,
    chi_square,
    flip_bound_holds,
    random_adaptive_algorithm,
    ratio_bound,
    tv_from_chi_square_bound,
)

SUITES = ("distributions", "correlations", "simulation", "lemma5", "reductions", "parity")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"name": self.name, "pass": self.passed, "seconds": round(self.seconds, 3), **self.detail}


def _timed(name, fn, *args, **kwargs) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# distributions and oracles


def check_mass_totals(nmax: int = 10):
    cases = 0
    bad = []
    for n in range(1, nmax + 1):
        for k in sorted({1, max(1, n // 2), n}):
            for p, q in ((Fraction(1), Fraction(1, 2)), (Fraction(3, 4), Fraction(1, 2)), (Fraction(3, 5), Fraction(1, 3))):
                d = PlantedDistribution(n, IndexSet(n, tuple(range(k))), p, q)
                num, den = mass_table(d)
                cases += 1
                if int(num.sum()) != den or (num < 0).any():
                    bad.append((n, k, str(p), str(q)))
        num, den = mass_table(ParityDistribution(n, IndexSet(n, (0,)), 1))
        cases += 1
        if int(num.sum()) != den:
            bad.append((n, "parity"))
    return not bad, {"cases": cases, "failures": bad[:10]}


def check_closed_form_expectations(nmax: int = 8, seed: int = 0):
    rng = make_rng(seed, 101)
    checked = 0
    bad = []
    for n in range(2, nmax + 1):
        for p, q in ((Fraction(1), Fraction(1, 2)), (Fraction(3, 4), Fraction(2, 5))):
            k = int(rng.integers(1, n + 1))
            plant = IndexSet.of(n, rng.choice(n, size=k, replace=False).tolist())
            dists = [PlantedDistribution(n, plant, p, q), ReferenceDistribution(n, q), ParityDistribution(n, plant, -1)]
            for d in dists:
                for _ in range(4):
                    s = int(rng.integers(1, n + 1))
                    idx = tuple(int(i) for i in rng.choice(n, size=s, replace=False))
                    for query in (Coordinate(idx[0]), Conjunction(idx), Parity(idx), Parity(idx, signed=False)):
                        checked += 1
                        if exact_expectation(d, query) != brute_force_expectation(d, query):
                            bad.append((type(d).__name__, n, query.digest()))
    return not bad, {"checked": checked, "failures": bad[:10]}


def check_oracle_contracts(seed: int = 0):
    """Exact and adversarial VSTAT answers are legal and clamped."""
    rng = make_rng(seed, 102)
    checked = 0
    bad = []
    for trial in range(40):
        n = int(rng.integers(4, 13))
        k = int(rng.integers(1, n + 1))
        plant = IndexSet.of(n, rng.choice(n, size=k, replace=False).tolist())
        d = PlantedDistribution(n, plant)
        t = int(rng.integers(1, 5000))
        for backend in ("exact", "adversarial"):
            s = make_session("VSTAT", d, backend, t=t)
            for _ in range(5):
                size = int(rng.integers(1, min(n, 4) + 1))
                q = Conjunction(tuple(int(i) for i in rng.choice(n, size=size, replace=False)))
                v = s.ask(q)
                e = exact_expectation(d, q)
                lo, hi = (Fraction(1, t), 1 - Fraction(1, t)) if t >= 2 else (Fraction(1, 2), Fraction(1, 2))
                checked += 1
                clamped_e = min(max(e, lo), hi)
                legal = within_vstat_tolerance(v, e, t) or v == clamped_e
                if not (legal and lo <= v <= hi):
                    bad.append((backend, n, k, t, q.digest(), str(v)))
    return not bad, {"checked": checked, "failures": bad[:10]}


def check_adversarial_blindness(n: int = 12, k: int = 3):
    """The coordinate detector at t = floor(n^2/(2k^2)) sees the same answers for every plant."""
    from itertools import combinations

    t = n * n // (2 * k * k)
    transcripts = set()
    outputs = set()
    for plant in combinations(range(n), k):
        d = PlantedDistribution(n, IndexSet(n, plant))
        s = make_session("VSTAT", d, "adversarial", t=t)
        r = detect_by_coordinate_bias(s, n, k)
        transcripts.add(tuple(s.responses()))
        outputs.add(tuple(r.recovered.to_list()))
    return len(transcripts) == 1 and len(outputs) == 1, {
        "plants": math.comb(n, k),
        "t": t,
        "distinctTranscripts": len(transcripts),
        "distinctOutputs": len(outputs),
    }


def check_honest_calibration(t: int = 100, ps=(0.05, 0.5, 0.55), delta: float = 0.01, trials: int = 1000, seed: int = 0):
    """Fraction of honest estimates inside the VSTAT(t) tolerance, per p.

    The query is a coordinate of a product distribution with bias p, so its
    expectation is exactly p.
    """
    rates = {}
    for j, p in enumerate(ps):
        pf = Fraction(str(p))
        d = ReferenceDistribution(1, pf)
        hits = 0
        for i in range(trials):
            est = estimate_from_samples(d, Coordinate(0), t, delta, make_rng(seed, 103, j, i))
            hits += within_vstat_tolerance(est, pf, t)
        rates[str(p)] = hits / trials
    return all(r >= 0.99 for r in rates.values()), {"t": t, "delta": delta, "trials": trials, "rates": rates}


# ---------------------------------------------------------------------------
# correlations and dimension


def check_correlation_exactness(nmax: int = 14, kmax: int = 4, ps=(Fraction(1), Fraction(3, 4)), q=Fraction(1, 2)):
    bad = []
    pairs = 0
    for p in ps:
        for k in range(1, kmax + 1):
            for n in range(max(2, k), nmax + 1):
                r = check_correlations_against_brute_force(n, k, p, q)
                pairs += r["pairs"]
                if not r["pass"]:
                    bad.append(r)
    return not bad, {"nmax": nmax, "kmax": kmax, "pairs": pairs, "failures": bad[:5]}


def check_average_correlation_bound(nmax: int = 24, kmax: int = 4):
    configs = 0
    bad = []
    worst = 0.0
    for n in range(2, nmax + 1):
        for k in range(1, min(kmax, n) + 1):
            for delta in delta_grid(n, k):
                for ell in range(1, k + 1):
                    r = greedy_worst_case_average(n, k, ell, delta)
                    configs += 1
                    worst = max(worst, float(r["average"] / r["bound"]))
                    if not r["pass"]:
                        bad.append({key: (str(v) if isinstance(v, Fraction) else v) for key, v in r.items()})
    return not bad, {"configs": configs, "violations": len(bad), "worstRatioToBound": worst, "failures": bad[:5]}


def check_overlap_ratios(nmax: int = 24, kmax: int = 4):
    configs = 0
    bad = []
    for n in range(2, nmax + 1):
        for k in range(2, min(kmax, n) + 1):
            for delta in delta_grid(n, k):
                for j in range(1, k):
                    configs += 1
                    if not overlap_ratio_holds(n, k, j, delta):
                        bad.append((n, k, j, delta))
    return not bad, {"configs": configs, "failures": bad[:5]}


# ---------------------------------------------------------------------------
# simulation


def check_sample_simulation(algorithms: int = 20, m: int = 8, n: int = 6, k: int = 2, delta_prime=Fraction(1, 4), seed: int = 0):
    """Exact transcript TV and expected ratio for random adaptive query trees."""
    diags = []
    for a in range(algorithms):
        rng = make_rng(seed, 104, a)
        plant = IndexSet.of(n, rng.choice(n, size=k, replace=False).tolist())
        d = PlantedDistribution(n, plant)
        alg = random_adaptive_algorithm(n, m, rng)
        diags.extend(check_simulation(alg, m, d, delta_prime, ref=d.reference()))
    tv_fail = [x.to_json() for x in diags if not x.tv_pass]
    ratio_fail = [x.to_json() for x in diags if not x.ratio_pass]
    return not tv_fail and not ratio_fail, {
        "algorithms": algorithms,
        "policies": sorted({x.policy for x in diags}),
        "cases": len(diags),
        "worstTv": max(float(x.tv) for x in diags),
        "worstRatio": max(float(x.ratio) for x in diags),
        "ratioBound": float(diags[0].ratio_bound),
        "tvFailures": tv_fail[:5],
        "ratioFailures": ratio_fail[:5],
    }


T_GRID = (2, 3, 5, 10, 31, 100, 316, 1000, 10_000, 100_000)


def flip_bound_points(count: int = 10_000, seed: int = 0):
    """Seeded (p, p', t) triples meeting |p' - p| >= tolerance(t, p), exact rationals.

    Half the points put p' uniformly in [0, 1]; the other half just past the
    band edge, where the bound is tightest.
    """
    rng = make_rng(seed, 105)
    scale = 10**9
    out = []
    per_t = count // len(T_GRID)
    for t in T_GRID:
        got = 0
        while got < per_t:
            p = Fraction(int(rng.integers(0, scale + 1)), scale)
            if rng.random() < 0.5:
                pp = Fraction(int(rng.integers(0, scale + 1)), scale)
            else:
                tol = tolerance_of(t, p)
                step = tol * (1 + 0.05 * rng.random()) * (1 if rng.random() < 0.5 else -1)
                pp = Fraction(math.ceil((float(p) + step) * scale) if step > 0 else math.floor((float(p) + step) * scale), scale)
                if not 0 <= pp <= 1:
                    continue
            try:
                verdict = flip_bound_holds(p, pp, t)
            except NotApplicable:
                continue
            out.append((p, pp, t, verdict))
            got += 1
    return out


def check_flip_bound_grid(count: int = 10_000, seed: int = 0):
    pts = flip_bound_points(count, seed)
    bad = [(str(p), str(pp), t) for p, pp, t, ok in pts if not ok]
    return not bad, {"points": len(pts), "violations": len(bad), "failures": bad[:5]}


def ratio_grid_points(count: int = 10_000):
    """(p, p', t) over the ratio bound's full hypothesis: p on an even grid,
    p' at the low edge, high edge, one quarter inside each edge, of the legal
    clamped VSTAT(t) band."""
    per_t = count // len(T_GRID)
    per_p = 4
    steps = per_t // per_p
    pts = []
    for t in T_GRID:
        for i in range(steps):
            p = Fraction(i, steps - 1)
            lo, hi = vstat_valid_interval(p, t)
            span = hi - lo
            for pp in (lo, lo + span / 4, hi - span / 4, hi):
                pts.append((p, pp, t))
    return pts


def check_ratio_grid(count: int = 10_000, factor: int = 2):
    """bernoulli_ratio(p, p') <= 1 + factor/t on ``ratio_grid_points``."""
    pts = ratio_grid_points(count)
    bad = []
    worst = 0.0
    for p, pp, t in pts:
        r = bernoulli_ratio(p, pp)
        worst = max(worst, float((r - 1) * t))
        if r > 1 + Fraction(factor, t):
            bad.append((str(p), str(pp), t, float(r)))
    return not bad, {"points": len(pts), "factor": factor, "violations": len(bad), "worstScaledExcess": worst, "failures": bad[:5]}


def check_tv_from_chi_square(pairs: int = 1000, seed: int = 0):
    rng = make_rng(seed, 106)
    bad = 0
    for _ in range(pairs):
        size = int(rng.integers(2, 65))
        a = rng.dirichlet(np.ones(size))
        b = rng.dirichlet(np.ones(size))
        tv = 0.5 * float(np.abs(a - b).sum())
        if tv > tv_from_chi_square_bound(chi_square(a, b)) * (1 + 1e-12):
            bad += 1
    return bad == 0, {"pairs": pairs, "violations": bad}


# ---------------------------------------------------------------------------
# reductions and parity


def check_reduction_invariants(trials: int = 50, n: int = 32, k: int = 8, seed: int = 0):
    problems = []
    for i in range(trials):
        rng = make_rng(seed, 107, i)
        g = generate_average_instance(n, k, rng)
        if not g.plant_block_is_ones():
            problems.append(("block", i))
        perm = rng.permutation(n)
        back = permute_columns(permute_columns(g, perm), np.argsort(perm))
        if not (np.array_equal(back.adjacency, g.adjacency) and back.plant_cols == g.plant_cols):
            problems.append(("permutation", i))
        sizes = [len(x.plant_cols) for x in replacement_sequence(g, "cols", rng)]
        if sizes[0] != k or sizes[-1] != 0 or any(b not in (a, a - 1) for a, b in zip(sizes, sizes[1:])):
            problems.append(("sequence", i))
        before = g.adjacency.copy()
        solve_average_via_distributional_solver(g, k, ground_truth_distributional_solver, rng)
        s = generate_sample_matrix(n, k, rng)
        sb = s.adjacency.copy()
        solve_distributional_via_average_solver(s, k, ground_truth_average_solver, rng)
        if not (np.array_equal(before, g.adjacency) and np.array_equal(sb, s.adjacency)):
            problems.append(("mutation", i))
    return not problems, {"trials": trials, "problems": problems[:10]}


def reduction_success_rates(trials: int = 500, n: int = 64, k: int = 16, k_prime: int = 16, seed: int = 0) -> dict:
    """Ground-truth-solver success rates of both reductions next to the
    claimed rates (1 - 2e^{-k/8}) and its product with the k' version."""
    s1 = s2 = 0
    for i in range(trials):
        rng = make_rng(seed, 108, i)
        sm = generate_sample_matrix(n, k, rng)
        r = solve_distributional_via_average_solver(sm, k, ground_truth_average_solver, rng)
        s1 += r.success and r.cols == sm.plant_cols
        g = generate_average_instance(n, k_prime, rng)
        r2 = solve_average_via_distributional_solver(g, k_prime, ground_truth_distributional_solver, rng)
        s2 += r2.matches(g.plant_rows, g.plant_cols)
    b1 = chernoff_window_bound(k)
    b2 = b1 * chernoff_window_bound(k_prime)
    out = {"trials": trials, "n": n, "k": k, "kPrime": k_prime}
    for name, wins, target in (("toAverage", s1, b1), ("toDistributional", s2, b2)):
        rate = wins / trials
        se = math.sqrt(target * (1 - target) / trials)
        out[name] = {
            "rate": rate,
            "claimed": target,
            "standardError": se,
            "zScore": (rate - target) / se,
            "withinThreeSE": abs(rate - target) <= 3 * se,
            "atLeastClaimed": rate >= target - 3 * se,
        }
    return out


def check_reduction_lower_bounds(trials: int = 200, seed: int = 0):
    r = reduction_success_rates(trials, seed=seed)
    ok = r["toAverage"]["atLeastClaimed"] and r["toDistributional"]["atLeastClaimed"]
    return ok, r


def check_parity_family(nmax: int = 10):
    results = [parity_family_check(n) for n in range(1, nmax + 1)]
    return all(r["pass"] for r in results), {"nmax": nmax, "sdLowerBounds": [r["sdLowerBound"] for r in results]}


def check_parity_responses(n: int = 8, seed: int = 0):
    """Exact STAT answers under D_c: 1 on c itself, 0 on every other nonzero parity,
    matching the uniform distribution everywhere except c."""
    rng = make_rng(seed, 109)
    c = IndexSet.of(n, rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist())
    d = ParityDistribution(n, c, 1)
    u = ReferenceDistribution(n, Fraction(1, 2))
    bad = []
    for mask in range(1, 1 << n):
        idx = tuple(i for i in range(n) if mask >> i & 1)
        v = exact_expectation(d, Parity(idx))
        want = 1 if mask == c.mask else 0
        if v != want or (mask != c.mask and exact_expectation(u, Parity(idx)) != v):
            bad.append(idx)
    return not bad, {"n": n, "c": c.to_list(), "failures": bad[:5]}


# ---------------------------------------------------------------------------


def run_suite(name: str, nmax: int = 14, seed: int = 0) -> list[CheckResult]:
    if name == "all":
        out = []
        for s in SUITES:
            out.extend(run_suite(s, nmax, seed))
        return out
    if name == "distributions":
        return [
            _timed("mass-totals", check_mass_totals, min(nmax, 10)),
            _timed("closed-form-expectations", check_closed_form_expectations, min(nmax, 10), seed),
            _timed("oracle-contracts", check_oracle_contracts, seed),
            _timed("adversarial-blindness", check_adversarial_blindness),
        ]
    if name == "correlations":
        return [
            _timed("correlation-exactness", check_correlation_exactness, nmax),
            _timed("average-correlation-bound", check_average_correlation_bound),
            _timed("overlap-ratios", check_overlap_ratios),
        ]
    if name == "simulation":
        return [
            _timed("sample-simulation", check_sample_simulation, seed=seed),
            _timed("tv-from-chi-square", check_tv_from_chi_square, seed=seed),
        ]
    if name == "lemma5":
        return [
            _timed("flip-bound-grid", check_flip_bound_grid, seed=seed),
            _timed("ratio-grid", check_ratio_grid),
            _timed("ratio-grid-3-over-t", check_ratio_grid, factor=3),
        ]
    if name == "reductions":
        return [
            _timed("reduction-invariants", check_reduction_invariants, seed=seed),
            _timed("reduction-lower-bounds", check_reduction_lower_bounds, seed=seed),
        ]
    if name == "parity":
        return [
            _timed("parity-family", check_parity_family, min(nmax, 10)),
            _timed("parity-responses", check_parity_responses, seed=seed),
        ]
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
