"""Reductions between the bipartite planted biclique and the sample form.

A sample matrix has one row per sample from the planted distribution over
{0,1}^n; a bipartite instance is an n x n adjacency matrix with a planted
all-ones block.  Both directions rebuild an instance of the other problem by
replacing rows or columns with uniform vectors one at a time and calling a
solver on every intermediate matrix.  The original matrix is the first
member of the sequence.

Generated instances carry their ground truth (planted rows and columns),
which is updated through permutations and replacements so that ground-truth
solvers can be plugged in to measure the reductions on their own.

The planted-row count that decides which side to shrink is hidden from the
reduction, so the sample-to-bipartite direction tries both sides and keeps
the first success.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .algorithms import subsets_of_size
from .points import IndexSet, format_matrix, read_matrix

UNIQUENESS_RETRIES = 10_000
BINOMIAL_RETRIES = 10_000


@dataclass
class BipartiteInstance:
    n: int
    adjacency: np.ndarray
    plant_rows: IndexSet | None = None
    plant_cols: IndexSet | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.uint8)
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {a.shape}")
        if a.size and a.max() > 1:
            raise ValueError("adjacency entries must be 0 or 1")
        self.adjacency = a

    def copy(self) -> "BipartiteInstance":
        return BipartiteInstance(self.n, self.adjacency.copy(), self.plant_rows, self.plant_cols, dict(self.meta))

    def has_ground_truth(self) -> bool:
        return self.plant_rows is not None and self.plant_cols is not None

    def plant_block_is_ones(self) -> bool:
        if not self.has_ground_truth():
            return True
        r, c = list(self.plant_rows), list(self.plant_cols)
        if not r or not c:
            return True
        return bool(self.adjacency[np.ix_(r, c)].all())

    def metadata(self, seed: int | None = None) -> dict:
        d = {
            "n": self.n,
            "k": len(self.plant_cols) if self.plant_cols is not None else None,
            "plantRows": self.plant_rows.to_list() if self.plant_rows is not None else None,
            "plantCols": self.plant_cols.to_list() if self.plant_cols is not None else None,
            "seed": seed,
        }
        d.update(self.meta)
        return d


def save_matrix_instance(path, instance: BipartiteInstance, seed: int | None = None) -> str:
    """Write the matrix file and its ``.json`` sidecar; returns the sidecar path."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(format_matrix(instance.adjacency))
    os.replace(tmp, path)
    side = f"{path}.json"
    with open(side + ".tmp", "w") as fh:
        json.dump(instance.metadata(seed), fh, indent=2)
    os.replace(side + ".tmp", side)
    return side


def load_matrix_instance(path) -> BipartiteInstance:
    m = read_matrix(path)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"{path}: expected a square matrix, got {m.shape}")
    rows = cols = None
    side = f"{path}.json"
    meta = {}
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
        if meta.get("plantRows") is not None:
            rows = IndexSet.of(n, meta["plantRows"])
        if meta.get("plantCols") is not None:
            cols = IndexSet.of(n, meta["plantCols"])
    return BipartiteInstance(n, m, rows, cols)


# ---------------------------------------------------------------------------
# completion


def complete_plant_from_rows(matrix: np.ndarray, rows) -> IndexSet:
    """Columns whose entries are 1 in every listed row."""
    rows = list(rows)
    if not rows:
        raise ValueError("need at least one row")
    m = np.asarray(matrix)
    return IndexSet.of(m.shape[1], np.flatnonzero(m[rows].all(axis=0)).tolist())


def complete_plant_from_cols(matrix: np.ndarray, cols) -> IndexSet:
    """Rows whose entries are 1 in every listed column."""
    cols = list(cols)
    if not cols:
        raise ValueError("need at least one column")
    m = np.asarray(matrix)
    return IndexSet.of(m.shape[0], np.flatnonzero(m[:, cols].all(axis=1)).tolist())


def _resample_until_unique(m: np.ndarray, rows: list[int], cols: list[int], rng) -> bool:
    """Redraw cells outside the block rows x cols, but in its rows or columns,
    until the block is the only completion on both sides.

    Only those cells are touched, so the block and every other cell keep
    their law.  Returns False if the retry cap is hit.
    """
    n_rows, n_cols = m.shape
    other_cols = np.setdiff1d(np.arange(n_cols), cols)
    other_rows = np.setdiff1d(np.arange(n_rows), rows)
    for _ in range(UNIQUENESS_RETRIES):
        bad_cols = other_cols[m[np.ix_(rows, other_cols)].all(axis=0)] if rows else np.array([], dtype=int)
        bad_rows = other_rows[m[np.ix_(other_rows, cols)].all(axis=1)] if cols else np.array([], dtype=int)
        if not len(bad_cols) and not len(bad_rows):
            return True
        if len(bad_cols):
            m[np.ix_(rows, bad_cols)] = rng.integers(0, 2, size=(len(rows), len(bad_cols)), dtype=np.uint8)
        if len(bad_rows):
            m[np.ix_(bad_rows, cols)] = rng.integers(0, 2, size=(len(bad_rows), len(cols)), dtype=np.uint8)
    return False


# ---------------------------------------------------------------------------
# generators


def generate_average_instance(n: int, k: int, rng: np.random.Generator, unique: bool = True) -> BipartiteInstance:
    """Uniform bipartite graph on [n] x [n] with a planted k x k all-ones block.

    With ``unique`` the block is also the only completion from its rows and
    from its columns.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rows = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    cols = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    m = rng.integers(0, 2, size=(n, n), dtype=np.uint8)
    m[np.ix_(rows, cols)] = 1
    meta = {}
    if unique and k < n:
        meta["unique"] = _resample_until_unique(m, rows, cols, rng)
    return BipartiteInstance(n, m, IndexSet(n, tuple(rows)), IndexSet(n, tuple(cols)), meta)


def generate_sample_matrix(n: int, k: int, rng: np.random.Generator, plant: IndexSet | None = None, unique: bool = True) -> BipartiteInstance:
    """n samples from the planted distribution with plant S, one per row.

    Each row takes the planted branch independently with probability k/n;
    those rows form ``plant_rows``.  With ``unique`` and more than k/2
    planted rows, cells are redrawn so that S is the only completion of the
    planted rows.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if plant is None:
        plant = IndexSet.of(n, rng.choice(n, size=k, replace=False).tolist())
    elif len(plant) != k or plant.n != n:
        raise ValueError("plant must be a k-subset of [n]")
    planted = np.flatnonzero(rng.random(n) < k / n).tolist()
    m = rng.integers(0, 2, size=(n, n), dtype=np.uint8)
    cols = list(plant)
    if planted:
        m[np.ix_(planted, cols)] = 1
    meta = {}
    if unique and 2 * len(planted) > k and k < n:
        other = np.setdiff1d(np.arange(n), cols)
        ok = False
        for _ in range(UNIQUENESS_RETRIES):
            bad = other[m[np.ix_(planted, other)].all(axis=0)]
            if not len(bad):
                ok = True
                break
            m[np.ix_(planted, bad)] = rng.integers(0, 2, size=(len(planted), len(bad)), dtype=np.uint8)
        meta["unique"] = ok
    return BipartiteInstance(n, m, IndexSet(n, tuple(planted)), plant, meta)


# ---------------------------------------------------------------------------
# replacement sequences


def replacement_sequence(instance: BipartiteInstance, axis: str, rng: np.random.Generator) -> Iterator[BipartiteInstance]:
    """Yield the instance, then the n instances obtained by replacing one
    more row (``axis="rows"``) or column (``axis="cols"``) with a uniform
    vector, in uniformly random order.  Ground truth shrinks accordingly."""
    if axis not in ("rows", "cols"):
        raise ValueError("axis must be 'rows' or 'cols'")
    cur = instance.copy()
    yield cur.copy()
    order = rng.permutation(cur.n)
    for idx in order:
        idx = int(idx)
        vec = rng.integers(0, 2, size=cur.n, dtype=np.uint8)
        if axis == "rows":
            cur.adjacency[idx, :] = vec
            if cur.plant_rows is not None and idx in cur.plant_rows:
                cur.plant_rows = IndexSet(cur.n, tuple(i for i in cur.plant_rows if i != idx))
        else:
            cur.adjacency[:, idx] = vec
            if cur.plant_cols is not None and idx in cur.plant_cols:
                cur.plant_cols = IndexSet(cur.n, tuple(i for i in cur.plant_cols if i != idx))
        yield cur.copy()


def permute_columns(instance: BipartiteInstance, perm: np.ndarray) -> BipartiteInstance:
    """Column j of the result is column perm[j] of the input."""
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    cols = None
    if instance.plant_cols is not None:
        cols = IndexSet.of(instance.n, [int(inv[c]) for c in instance.plant_cols])
    return BipartiteInstance(instance.n, instance.adjacency[:, perm].copy(), instance.plant_rows, cols, dict(instance.meta))


# ---------------------------------------------------------------------------
# solver hooks


@dataclass(frozen=True)
class SolverResult:
    rows: IndexSet | None
    cols: IndexSet | None
    success: bool


SolverHook = Callable[[BipartiteInstance, int], SolverResult]


def ground_truth_average_solver(instance: BipartiteInstance, target: int) -> SolverResult:
    """Succeeds exactly when the tracked plant is target x target."""
    r, c = instance.plant_rows, instance.plant_cols
    ok = r is not None and c is not None and len(r) == target and len(c) == target
    return SolverResult(r if ok else None, c if ok else None, ok)


def ground_truth_distributional_solver(instance: BipartiteInstance, target: int) -> SolverResult:
    """Succeeds when the tracked plant has ``target`` columns and at least one row."""
    r, c = instance.plant_rows, instance.plant_cols
    ok = r is not None and c is not None and len(c) == target and len(r) >= 1
    return SolverResult(r if ok else None, c if ok else None, ok)


def empirical_coordinate_solver(instance: BipartiteInstance, target: int) -> SolverResult:
    """Coordinate-bias detector run on the rows as an empirical distribution:
    the ``target`` columns with the largest means (ties to the lower index),
    then the rows that are all ones on them.  Reports success when that
    yields a target x target all-ones block."""
    m = instance.adjacency
    means = m.mean(axis=0)
    order = sorted(range(instance.n), key=lambda i: (-means[i], i))
    cols = IndexSet.of(instance.n, order[:target])
    rows = complete_plant_from_cols(m, cols)
    return SolverResult(rows, cols, len(rows) == target)


def empirical_subset_solver(subset_size: int) -> SolverHook:
    """Subset-enumeration detector on the rows as an empirical distribution:
    union of the size-s column subsets whose all-ones frequency exceeds
    3 target / (4n).  Success when the union has ``target`` columns."""

    def solve(instance: BipartiteInstance, target: int) -> SolverResult:
        n = instance.n
        if target < subset_size:
            return SolverResult(None, None, False)
        subsets = subsets_of_size(n, subset_size)
        m = instance.adjacency.astype(bool)
        freq = np.empty(len(subsets))
        for lo in range(0, len(subsets), 1 << 16):
            block = subsets[lo : lo + (1 << 16)]
            hits = m[:, block[:, 0]].copy()
            for j in range(1, subset_size):
                hits &= m[:, block[:, j]]
            freq[lo : lo + len(block)] = hits.mean(axis=0)
        acc = subsets[freq > 3 * target / (4 * n)]
        cols = IndexSet.of(n, np.unique(acc).tolist()) if len(acc) else IndexSet(n, ())
        if len(cols) != target:
            return SolverResult(None, cols, False)
        rows = complete_plant_from_cols(instance.adjacency, cols)
        return SolverResult(rows, cols, len(rows) >= 1)

    return solve


# ---------------------------------------------------------------------------
# the reductions


@dataclass
class ReductionResult:
    success: bool
    rows: IndexSet | None
    cols: IndexSet | None
    direction: str | None
    step: int | None
    solver_calls: int
    flags: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def matches(self, rows: IndexSet | None, cols: IndexSet | None) -> bool:
        if not self.success:
            return False
        ok = True
        if rows is not None:
            ok &= self.rows == rows
        if cols is not None:
            ok &= self.cols == cols
        return bool(ok)

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "rows": self.rows.to_list() if self.rows is not None else None,
            "cols": self.cols.to_list() if self.cols is not None else None,
            "direction": self.direction,
            "step": self.step,
            "solverCalls": self.solver_calls,
            "flags": list(self.flags),
            **self.info,
        }


def solve_distributional_via_average_solver(samples, k: int, solver: SolverHook, rng: np.random.Generator) -> ReductionResult:
    """Recover the plant S of a sample matrix with a bipartite-instance solver.

    Columns are permuted at random.  The column-shrinking sequence is tried
    with every target in (k/2, k]; then the row-shrinking sequence with
    target k.  A column-direction success gives plant rows, completed
    against the original samples; a row-direction success gives the
    columns directly (after undoing the permutation).
    """
    inst = samples if isinstance(samples, BipartiteInstance) else BipartiteInstance(len(samples), np.asarray(samples))
    n = inst.n
    if k < 2:
        raise ValueError("need k >= 2")
    original = inst.adjacency.copy()
    flags = []
    if inst.plant_rows is not None:
        kp = len(inst.plant_rows)
        if kp == 0:
            flags.append("no-planted-rows")
        if not (k / 2 <= kp <= 2 * k):
            flags.append("planted-rows-outside-window")
    perm = rng.permutation(n)
    permuted = permute_columns(inst, perm)
    calls = 0
    targets = list(range(k // 2 + 1, k + 1))
    for step, cur in enumerate(replacement_sequence(permuted, "cols", rng)):
        for target in targets:
            calls += 1
            res = solver(cur.copy(), target)
            if res.success and res.rows is not None and len(res.rows):
                cols = complete_plant_from_rows(original, res.rows)
                result = ReductionResult(True, res.rows, cols, "cols", step, calls, flags, {"target": target})
                _check_unmodified(inst, original)
                return result
    for step, cur in enumerate(replacement_sequence(permuted, "rows", rng)):
        calls += 1
        res = solver(cur.copy(), k)
        if res.success and res.cols is not None:
            cols = IndexSet.of(n, [int(perm[j]) for j in res.cols])
            result = ReductionResult(True, res.rows, cols, "rows", step, calls, flags, {"target": k})
            _check_unmodified(inst, original)
            return result
    _check_unmodified(inst, original)
    return ReductionResult(False, None, None, None, None, calls, flags + ["solver-never-succeeded"])


def _check_unmodified(inst: BipartiteInstance, original: np.ndarray):
    if not np.array_equal(inst.adjacency, original):
        raise RuntimeError("input matrix was modified")


def draw_conditioned_binomial(n: int, k_prime: int, rng: np.random.Generator, retries: int = BINOMIAL_RETRIES) -> tuple[int, int]:
    """k ~ Binomial(n, k'/n) redrawn until k'/2 < k < 2k'; returns (k, draws used)."""
    for attempt in range(1, retries + 1):
        k = int(rng.binomial(n, k_prime / n))
        if k_prime < 2 * k < 4 * k_prime:
            return k, attempt
    raise RuntimeError(f"no binomial draw landed in ({k_prime}/2, {2 * k_prime}) after {retries} tries")


def solve_average_via_distributional_solver(instance: BipartiteInstance, k_prime: int, solver: SolverHook, rng: np.random.Generator) -> ReductionResult:
    """Recover the k' x k' block of a bipartite instance with a sample-matrix solver.

    Draws k as above.  When k <= k' the rows are replaced one by one and the
    solver looks for k' plant columns; the rows are then completed from those
    columns.  When k > k' the columns are replaced and the solver looks for
    a plant of between ceil(k'/2) and k'-1 columns, so the k' planted rows
    fall in the usual window for that size; rows are completed from the
    found columns and the columns from those rows.
    """
    n = instance.n
    if not 1 <= k_prime <= n:
        raise ValueError("need 1 <= k' <= n")
    original = instance.adjacency.copy()
    k, attempts = draw_conditioned_binomial(n, k_prime, rng)
    info = {"k": k, "binomialDraws": attempts}
    calls = 0
    if k <= k_prime:
        for step, cur in enumerate(replacement_sequence(instance, "rows", rng)):
            calls += 1
            res = solver(cur.copy(), k_prime)
            if res.success and res.cols is not None and len(res.cols):
                rows = complete_plant_from_cols(original, res.cols)
                _check_unmodified(instance, original)
                return ReductionResult(True, rows, res.cols, "rows", step, calls, [], {**info, "target": k_prime})
    else:
        targets = list(range(max(1, math.ceil(k_prime / 2)), k_prime))
        for step, cur in enumerate(replacement_sequence(instance, "cols", rng)):
            for target in targets:
                calls += 1
                res = solver(cur.copy(), target)
                if res.success and res.cols is not None and len(res.cols):
                    rows = complete_plant_from_cols(original, res.cols)
                    if not len(rows):
                        continue
                    cols = complete_plant_from_rows(original, rows)
                    _check_unmodified(instance, original)
                    return ReductionResult(True, rows, cols, "cols", step, calls, [], {**info, "target": target})
    _check_unmodified(instance, original)
    return ReductionResult(False, None, None, None, None, calls, ["solver-never-succeeded"], info)


def chernoff_window_bound(k: int) -> float:
    """1 - 2 exp(-k/8)."""
    return 1 - 2 * math.exp(-k / 8)
