"""Batch command-line front end.

Exit status: 0 on success, 1 when the experiment ran but failed its check,
2 on usage errors.  ``SQLAB_THREADS`` and ``SQLAB_ARITH`` override the
defaults of ``--threads`` and ``--arith``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import __version__
from ._numeric import as_fraction
from .algorithms import (
    MAX_SUBSETS,
    coordinate_bias_t,
    default_subset_size,
    detect_by_coordinate_bias,
    detect_by_subset_enumeration,
    solve_max_xor_sat_statistically,
    subset_enumeration_t,
)
from .dimension import (
    ParameterError,
    dense_subgraph_sda_bound,
    dimension_table_csv,
    sd_to_sda,
    sda_clique_bound,
    sqdim_bridge,
    stat_lower_bound_from_sd,
)
from .distributions import (
    ParityDistribution,
    PlantedDistribution,
    ReferenceDistribution,
    load_instance,
    save_instance,
)
from .oracles import make_session
from .points import IndexSet
from .reductions import (
    chernoff_window_bound,
    empirical_coordinate_solver,
    empirical_subset_solver,
    generate_average_instance,
    generate_sample_matrix,
    ground_truth_average_solver,
    ground_truth_distributional_solver,
    solve_average_via_distributional_solver,
    solve_distributional_via_average_solver,
)
from .report import ExperimentReport, atomic_write
from .rng import make_rng
from .simulation import check_simulation, random_adaptive_algorithm
from .verify import SUITES, run_suite


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling


def _env_int(name, default):
    v = os.environ.get(name)
    if v is None:
        return default
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {v!r}")


def _scalar(text: str, arith: str):
    """Parse a number: Fraction in exact mode (``0.6`` -> 3/5, ``3/4`` works), float otherwise."""
    try:
        if arith == "exact":
            return as_fraction(text)
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}")


def _index_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", help="report path (JSON; a CSV mirror is written next to it)")
    common.add_argument("--threads", type=int, default=None, help="worker processes for trials (env SQLAB_THREADS, default 1)")
    common.add_argument("--arith", choices=("exact", "float"), default=None, help="number parsing and arithmetic mode (env SQLAB_ARITH, default exact)")

    parser = argparse.ArgumentParser(prog="sqlab", description="Statistical-query laboratory")
    parser.add_argument("--version", action="version", version=f"sqlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a planted-distribution instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--p", default="1", help="plant bias (default 1)")
    g.add_argument("--q", default="1/2", help="background bias (default 1/2)")
    g.add_argument("--plant", help="explicit plant as comma-separated indices (default: random)")
    g.add_argument("--matrix", help="also write n samples as a 0/1 matrix file plus .json sidecar")

    d = sub.add_parser("detect", parents=[common], help="run a detector against an oracle")
    d.add_argument("--algo", choices=("coords", "subsets"), required=True)
    d.add_argument("--instance", required=True, help="instance JSON written by gen")
    d.add_argument("--oracle", choices=("vstat",), default="vstat")
    d.add_argument("--t", type=int, help="VSTAT parameter (default: the detector's own requirement)")
    d.add_argument("--backend", choices=("exact", "honest", "adversarial"), default="exact")
    d.add_argument("--delta", default="0.01", help="honest backend failure probability per query")
    d.add_argument("--subset-size", type=int, help="subset size for --algo subsets (default ceil(log2 n))")
    d.add_argument("--transcript", help="write the oracle transcript as JSON lines")

    x = sub.add_parser("maxxorsat", parents=[common], help="run the baseline MAX-XOR-SAT solver on parity distributions")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--tau", default="1/20")
    x.add_argument("--budget", type=int, default=1000)
    x.add_argument("--trials", type=int, default=20)
    x.add_argument("--backend", choices=("exact", "adversarial"), default="adversarial")

    s = sub.add_parser("simulate", parents=[common], help="compare SAMPLE transcripts with their VSTAT simulation")
    s.add_argument("--n", type=int, default=6)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--m", type=int, default=8)
    s.add_argument("--delta-prime", default="1/4")
    s.add_argument("--algorithms", type=int, default=20)

    dm = sub.add_parser("dim", parents=[common], help="statistical-dimension calculators")
    dm.add_argument("which", choices=("clique", "dense", "sd", "sqdim"))
    dm.add_argument("--n", type=int)
    dm.add_argument("--k", type=int)
    dm.add_argument("--delta", help="plant-size exponent (k <= n^(1/2 - delta))")
    dm.add_argument("--ell", type=int)
    dm.add_argument("--p")
    dm.add_argument("--q")
    dm.add_argument("--success", default="2/3", help="success probability used for the query/sample bounds")
    dm.add_argument("--m", help="size of the distribution family (sd)")
    dm.add_argument("--gamma")
    dm.add_argument("--beta")
    dm.add_argument("--tau")
    dm.add_argument("--gamma-prime")
    dm.add_argument("--dprime", type=int)

    r = sub.add_parser("reduce", parents=[common], help="run the reductions between bipartite and sample forms")
    r.add_argument("direction", choices=("dist2avg", "avg2dist"))
    r.add_argument("--n", type=int, default=64)
    r.add_argument("--k", type=int, default=16)
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--solver", choices=("ground-truth", "coords", "subsets"), default="ground-truth")

    v = sub.add_parser("verify", parents=[common], help="run self-check suites")
    v.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    v.add_argument("--nmax", type=int, default=14, help="largest n for exhaustive correlation checks")
    return parser


# ---------------------------------------------------------------------------
# commands


def _trial_map(fn, args_list, threads: int):
    if threads <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def _emit(report: ExperimentReport, out: str | None):
    if out:
        report.write(out)
    else:
        json.dump(report.to_json(), sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_gen(a, cfg) -> int:
    if not 1 <= a.k <= a.n:
        raise UsageError("need 1 <= k <= n")
    p, q = as_fraction(a.p), as_fraction(a.q)
    rng = make_rng(a.seed)
    if a.plant:
        plant = IndexSet.of(a.n, _index_list(a.plant))
        if len(plant) != a.k:
            raise UsageError("--plant must list exactly k distinct indices")
    else:
        plant = IndexSet.of(a.n, rng.choice(a.n, size=a.k, replace=False).tolist())
    try:
        dist = PlantedDistribution(a.n, plant, p, q)
    except ValueError as e:
        raise UsageError(str(e))
    if not a.out:
        raise UsageError("gen needs --out")
    save_instance(a.out, dist, seed=a.seed)
    loaded, _ = load_instance(a.out)
    ok = loaded == dist
    if a.matrix:
        from .reductions import save_matrix_instance

        m = generate_sample_matrix(a.n, a.k, make_rng(a.seed, 1), plant=plant, unique=False)
        save_matrix_instance(a.matrix, m, a.seed)
    print(json.dumps({"instance": a.out, "plant": plant.to_list(), "verified": ok, "config": cfg}))
    return 0 if ok else 1


def cmd_detect(a, cfg) -> int:
    dist, _ = load_instance(a.instance)
    n, k = dist.n, dist.k
    if a.algo == "coords":
        t = a.t if a.t is not None else coordinate_bias_t(n, k)
    else:
        t = a.t if a.t is not None else subset_enumeration_t(n, k)
    delta = float(as_fraction(a.delta))
    session = make_session("VSTAT", dist, a.backend, t=t, rng=make_rng(a.seed, 2), delta=delta, record=a.algo == "coords" or n <= 24 or bool(a.transcript))
    try:
        if a.algo == "coords":
            res = detect_by_coordinate_bias(session, n, k)
        else:
            res = detect_by_subset_enumeration(session, n, k, a.subset_size)
    except ValueError as e:
        raise UsageError(str(e))
    if a.transcript:
        session.export_jsonl(a.transcript)
    ok = res.recovered == dist.plant
    report = ExperimentReport(
        experiment_id=f"detect-{a.algo}",
        parameters={"n": n, "k": k, "t": t, "backend": a.backend, "p": float(dist.p), "q": float(dist.q)},
        trials=[{"seed": a.seed, "success": ok, "queries": res.queries_used, "samples": session.sample_count}],
        formula_values={"coordinateBiasT": coordinate_bias_t(n, k), "subsetEnumerationT": subset_enumeration_t(n, k)},
        config=cfg,
    )
    report.trials[0]["result"] = res.to_json()
    report.trials[0]["plant"] = dist.plant.to_list()
    _emit(report.finalize(1), a.out)
    return 0 if ok else 1


def _maxxorsat_trial(n, tau, budget, backend, seed):
    rng = make_rng(seed)
    mask = int(rng.integers(1, 1 << n))  # uniform over nonzero parities
    c = IndexSet.of(n, [i for i in range(n) if mask >> i & 1])
    dist = ParityDistribution(n, c, 1)
    ref = ReferenceDistribution(n, Fraction(1, 2))
    session = make_session("STAT", dist, backend, tau=tau, ref=ref, record=False)
    res = solve_max_xor_sat_statistically(session, n, budget, rng)
    frac = res.satisfied_fraction(c)
    return {"seed": seed, "success": res.assignment.bits == c.mask, "satisfiedFraction": float(frac), "queries": res.queries_used, "budgetExhausted": res.budget_exhausted}


def cmd_maxxorsat(a, cfg) -> int:
    tau = as_fraction(a.tau)
    if not 0 < tau < 1:
        raise UsageError("--tau must lie in (0, 1)")
    if not 1 <= a.n <= 62:
        raise UsageError("--n must lie in [1, 62]")
    args = [(a.n, tau, a.budget, a.backend, int(make_rng(a.seed, i).integers(0, 2**63))) for i in range(a.trials)]
    trials = _trial_map(_maxxorsat_trial, args, cfg["threads"])
    blind = sum(t["satisfiedFraction"] <= 0.5 + float(tau) for t in trials) / len(trials)
    report = ExperimentReport(
        "maxxorsat",
        {"n": a.n, "tau": float(tau), "budget": a.budget, "backend": a.backend, "trials": a.trials},
        trials,
        formula_values={"statQueryLowerBound": float(stat_lower_bound_from_sd(2**a.n - 1, 0, 1, tau)), "fractionAtMostHalfPlusTau": blind},
        config=cfg,
    )
    _emit(report.finalize(a.trials), a.out)
    return 0


def cmd_simulate(a, cfg) -> int:
    dp = as_fraction(a.delta_prime)
    if not 0 < dp <= Fraction(1, 2):
        raise UsageError("--delta-prime must lie in (0, 1/2]")
    if not 1 <= a.k <= a.n or a.n > 10 or not 1 <= a.m <= 16:
        raise UsageError("need 1 <= k <= n <= 10 and 1 <= m <= 16")
    trials = []
    for i in range(a.algorithms):
        rng = make_rng(a.seed, i)
        plant = IndexSet.of(a.n, rng.choice(a.n, size=a.k, replace=False).tolist())
        dist = PlantedDistribution(a.n, plant)
        alg = random_adaptive_algorithm(a.n, a.m, rng)
        for dg in check_simulation(alg, a.m, dist, dp, ref=dist.reference()):
            trials.append({"seed": a.seed, "algorithm": i, "success": dg.passed, **dg.to_json()})
    report = ExperimentReport("simulate", {"n": a.n, "k": a.k, "m": a.m, "deltaPrime": float(dp), "algorithms": a.algorithms}, trials, config=cfg)
    _emit(report.finalize(), a.out)
    return 0 if all(t["success"] for t in trials) else 1


def _need(a, *names):
    missing = [n for n in names if getattr(a, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"dim {a.which} needs " + ", ".join(f"--{m}" for m in missing))


def cmd_dim(a, cfg) -> int:
    arith = cfg["arith"]
    try:
        if a.which in ("clique", "dense"):
            _need(a, "n", "k", "delta", "ell")
            delta = _scalar(a.delta, arith)
            success = _scalar(a.success, arith)
            if a.which == "clique":
                est = sda_clique_bound(a.n, a.k, delta, a.ell, success)
            else:
                _need(a, "p", "q")
                est = dense_subgraph_sda_bound(a.n, a.k, delta, a.ell, _scalar(a.p, "exact"), _scalar(a.q, "exact"), success)
            body = est.to_json()
            if a.out:
                root = a.out[:-5] if a.out.endswith(".json") else a.out
                atomic_write(a.out, json.dumps({"schemaVersion": 1, "config": cfg, "estimate": body}, indent=2) + "\n")
                atomic_write(root + ".csv", dimension_table_csv([est]))
            else:
                print(json.dumps({"config": cfg, "estimate": body}, indent=2))
            return 0
        if a.which == "sd":
            _need(a, "m", "gamma", "beta")
            m, gamma, beta = (_scalar(v, arith) for v in (a.m, a.gamma, a.beta))
            body = {}
            if a.tau is not None:
                body["statLowerBound"] = stat_lower_bound_from_sd(m, gamma, beta, _scalar(a.tau, arith))
            if a.gamma_prime is not None:
                body["sdaLowerBound"] = sd_to_sda(m, gamma, beta, _scalar(a.gamma_prime, arith))
            if not body:
                raise UsageError("dim sd needs --tau and/or --gamma-prime")
        else:
            _need(a, "dprime")
            body = sqdim_bridge(a.dprime).to_json()
    except ParameterError as e:
        raise UsageError(str(e))
    body = {k: (str(v) if isinstance(v, Fraction) and v.denominator != 1 else (int(v) if isinstance(v, Fraction) else v)) for k, v in body.items()}
    text = json.dumps({"schemaVersion": 1, "config": cfg, **body}, indent=2) + "\n"
    if a.out:
        atomic_write(a.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _solver_for(direction, name, n):
    if name == "ground-truth":
        return ground_truth_average_solver if direction == "dist2avg" else ground_truth_distributional_solver
    if name == "coords":
        return empirical_coordinate_solver
    return empirical_subset_solver(default_subset_size(n))


def _reduce_trial(direction, n, k, solver_name, seed):
    rng = make_rng(seed)
    solver = _solver_for(direction, solver_name, n)
    if direction == "dist2avg":
        inst = generate_sample_matrix(n, k, rng)
        res = solve_distributional_via_average_solver(inst, k, solver, rng)
        ok = res.success and res.cols == inst.plant_cols
        return {"seed": seed, "success": bool(ok), "plantedRows": len(inst.plant_rows), "solverCalls": res.solver_calls, "direction": res.direction}
    inst = generate_average_instance(n, k, rng)
    res = solve_average_via_distributional_solver(inst, k, solver, rng)
    ok = res.matches(inst.plant_rows, inst.plant_cols)
    return {"seed": seed, "success": bool(ok), "drawnK": res.info.get("k"), "solverCalls": res.solver_calls, "direction": res.direction}


def cmd_reduce(a, cfg) -> int:
    if not 2 <= a.k <= a.n:
        raise UsageError("need 2 <= k <= n")
    if a.solver == "subsets" and math.comb(a.n, default_subset_size(a.n)) > MAX_SUBSETS:
        raise UsageError(f"subset solver would enumerate C({a.n},{default_subset_size(a.n)}) subsets; use n <= 40 or another solver")
    args = [(a.direction, a.n, a.k, a.solver, int(make_rng(a.seed, i).integers(0, 2**63))) for i in range(a.trials)]
    trials = _trial_map(_reduce_trial, args, cfg["threads"])
    b = chernoff_window_bound(a.k)
    claimed = b if a.direction == "dist2avg" else b * b
    report = ExperimentReport(
        f"reduce-{a.direction}",
        {"n": a.n, "k": a.k, "trials": a.trials, "solver": a.solver},
        trials,
        formula_values={"claimedSuccessRate": claimed},
        config=cfg,
    )
    report.finalize(a.trials)
    se = math.sqrt(claimed * (1 - claimed) / a.trials)
    report.aggregates["atLeastClaimed"] = report.aggregates["successRate"] >= claimed - 3 * se
    _emit(report, a.out)
    return 0 if report.aggregates["atLeastClaimed"] else 1


def cmd_verify(a, cfg) -> int:
    results = run_suite(a.suite, nmax=a.nmax, seed=a.seed)
    trials = [{"seed": a.seed, "success": r.passed, **r.to_json()} for r in results]
    report = ExperimentReport(f"verify-{a.suite}", {"suite": a.suite, "nmax": a.nmax}, trials, config=cfg)
    report.finalize()
    if a.out:
        report.write(a.out)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.2f}s)", file=sys.stderr)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "gen": cmd_gen,
    "detect": cmd_detect,
    "maxxorsat": cmd_maxxorsat,
    "simulate": cmd_simulate,
    "dim": cmd_dim,
    "reduce": cmd_reduce,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        threads = args.threads if args.threads is not None else _env_int("SQLAB_THREADS", 1)
        arith = args.arith or os.environ.get("SQLAB_ARITH", "exact")
        if arith not in ("exact", "float"):
            raise UsageError(f"SQLAB_ARITH must be 'exact' or 'float', got {arith!r}")
        if threads < 1:
            raise UsageError("thread count must be at least 1")
        cfg = {k: v for k, v in vars(args).items()}
        cfg.update(threads=threads, arith=arith)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"sqlab {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
