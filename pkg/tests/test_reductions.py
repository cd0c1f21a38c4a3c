import math

import numpy as np
import pytest

from sqlab.points import IndexSet
from sqlab.reductions import (
    BipartiteInstance,
    chernoff_window_bound,
    complete_plant_from_cols,
    complete_plant_from_rows,
    draw_conditioned_binomial,
    empirical_coordinate_solver,
    empirical_subset_solver,
    generate_average_instance,
    generate_sample_matrix,
    ground_truth_average_solver,
    ground_truth_distributional_solver,
    load_matrix_instance,
    permute_columns,
    replacement_sequence,
    save_matrix_instance,
    solve_average_via_distributional_solver,
    solve_distributional_via_average_solver,
)
from sqlab.rng import make_rng


def block_is_ones(m, rows, cols):
    return bool(np.asarray(m)[np.ix_(list(rows), list(cols))].all())


class TestCompletion:
    def test_small_block(self):
        m = np.zeros((4, 4), dtype=np.uint8)
        m[np.ix_([0, 1], [2, 3])] = 1
        assert complete_plant_from_rows(m, [0, 1]).to_list() == [2, 3]
        assert complete_plant_from_cols(m, [2, 3]).to_list() == [0, 1]

    def test_all_rows_of_uniform_matrix(self):
        empty = 0
        for i in range(200):
            m = make_rng(3, i).integers(0, 2, size=(24, 24), dtype=np.uint8)
            empty += len(complete_plant_from_rows(m, range(24))) == 0
        # each column survives with probability 2^-24
        assert empty == 200

    def test_single_full_row(self):
        m = np.zeros((5, 5), dtype=np.uint8)
        m[2] = 1
        assert complete_plant_from_rows(m, [2]).to_list() == list(range(5))

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            complete_plant_from_rows(np.ones((3, 3)), [])


class TestGenerators:
    def test_block(self):
        g = generate_average_instance(8, 3, make_rng(0))
        assert g.plant_block_is_ones() and len(g.plant_rows) == len(g.plant_cols) == 3
        assert block_is_ones(g.adjacency, g.plant_rows, g.plant_cols)

    def test_full(self):
        g = generate_average_instance(6, 6, make_rng(0))
        assert g.adjacency.all()

    def test_unique_completion(self):
        for i in range(50):
            g = generate_average_instance(32, 8, make_rng(4, i))
            assert g.meta["unique"]
            assert complete_plant_from_rows(g.adjacency, g.plant_rows) == g.plant_cols
            assert complete_plant_from_cols(g.adjacency, g.plant_cols) == g.plant_rows

    def test_background_density(self):
        total = ones = 0
        for i in range(1000):
            g = generate_average_instance(16, 4, make_rng(5, i))
            mask = np.ones((16, 16), dtype=bool)
            mask[np.ix_(list(g.plant_rows), list(g.plant_cols))] = False
            total += mask.sum()
            ones += g.adjacency[mask].sum()
        assert abs(ones / total - 0.5) <= 0.05

    def test_sample_matrix(self):
        s = generate_sample_matrix(32, 8, make_rng(1))
        assert block_is_ones(s.adjacency, s.plant_rows, s.plant_cols) or not len(s.plant_rows)
        if 2 * len(s.plant_rows) > 8:
            assert complete_plant_from_rows(s.adjacency, s.plant_rows) == s.plant_cols

    def test_planted_row_rate(self):
        counts = [len(generate_sample_matrix(64, 16, make_rng(6, i), unique=False).plant_rows) for i in range(400)]
        assert abs(np.mean(counts) - 16) < 4 * math.sqrt(64 * 0.25 * 0.75 / 400)

    def test_matrix_files(self, tmp_path):
        g = generate_average_instance(10, 3, make_rng(2))
        path = tmp_path / "g.txt"
        side = save_matrix_instance(path, g, seed=2)
        assert side.endswith(".json")
        back = load_matrix_instance(path)
        assert np.array_equal(back.adjacency, g.adjacency)
        assert back.plant_rows == g.plant_rows and back.plant_cols == g.plant_cols


class TestSequences:
    def test_shrinks_to_nothing(self):
        g = generate_average_instance(20, 5, make_rng(7))
        seq = list(replacement_sequence(g, "rows", make_rng(8)))
        sizes = [len(x.plant_rows) for x in seq]
        assert len(seq) == 21 and sizes[0] == 5 and sizes[-1] == 0
        assert all(b in (a, a - 1) for a, b in zip(sizes, sizes[1:]))
        assert np.array_equal(seq[0].adjacency, g.adjacency)
        for x in seq:
            if len(x.plant_rows):
                assert block_is_ones(x.adjacency, x.plant_rows, x.plant_cols)

    def test_permutation_round_trip(self):
        g = generate_average_instance(12, 4, make_rng(9))
        perm = make_rng(10).permutation(12)
        p = permute_columns(g, perm)
        assert block_is_ones(p.adjacency, p.plant_rows, p.plant_cols)
        back = permute_columns(p, np.argsort(perm))
        assert np.array_equal(back.adjacency, g.adjacency) and back.plant_cols == g.plant_cols

    def test_bad_axis(self):
        g = generate_average_instance(4, 2, make_rng(0))
        with pytest.raises(ValueError):
            next(replacement_sequence(g, "diag", make_rng(0)))


class TestDistributionalToAverage:
    def test_ground_truth_rate(self):
        k, trials = 16, 500
        wins = 0
        for i in range(trials):
            rng = make_rng(11, i)
            s = generate_sample_matrix(64, k, rng)
            r = solve_distributional_via_average_solver(s, k, ground_truth_average_solver, rng)
            wins += r.success and r.cols == s.plant_cols
        assert wins / trials >= chernoff_window_bound(k) - 0.05

    def test_no_planted_rows(self):
        rng = make_rng(12)
        plant = IndexSet.of(16, [0, 1, 2, 3])
        inst = BipartiteInstance(16, rng.integers(0, 2, size=(16, 16), dtype=np.uint8), IndexSet(16, ()), plant)
        r = solve_distributional_via_average_solver(inst, 4, ground_truth_average_solver, rng)
        assert not r.success
        assert "no-planted-rows" in r.flags and "planted-rows-outside-window" in r.flags

    def test_coordinate_solver_is_sound(self):
        # at n = 32 random target x target bicliques abound, so a reported
        # success is a genuine all-ones block but rarely the planted one
        for i in range(40):
            rng = make_rng(13, i)
            s = generate_sample_matrix(32, 8, rng)
            before = s.adjacency.copy()
            r = solve_distributional_via_average_solver(s, 8, empirical_coordinate_solver, rng)
            assert np.array_equal(before, s.adjacency)
            if r.success:
                assert len(r.cols) >= 1
                assert block_is_ones(s.adjacency, complete_plant_from_cols(s.adjacency, r.cols), r.cols)

    def test_small_k_rejected(self):
        s = generate_sample_matrix(8, 1, make_rng(0))
        with pytest.raises(ValueError):
            solve_distributional_via_average_solver(s, 1, ground_truth_average_solver, make_rng(0))


class TestAverageToDistributional:
    def test_ground_truth_rate(self):
        kp, trials = 16, 500
        wins = 0
        for i in range(trials):
            rng = make_rng(14, i)
            g = generate_average_instance(64, kp, rng)
            r = solve_average_via_distributional_solver(g, kp, ground_truth_distributional_solver, rng)
            wins += r.matches(g.plant_rows, g.plant_cols)
        assert wins / trials >= chernoff_window_bound(kp) ** 2 - 0.05

    def test_all_ones(self):
        g = generate_average_instance(10, 10, make_rng(1))
        r = solve_average_via_distributional_solver(g, 10, ground_truth_distributional_solver, make_rng(2))
        assert r.success and r.rows.to_list() == r.cols.to_list() == list(range(10))

    def test_subset_solver_is_sound(self):
        g = generate_average_instance(32, 8, make_rng(15))
        before = g.adjacency.copy()
        r = solve_average_via_distributional_solver(g, 8, empirical_subset_solver(5), make_rng(16))
        assert np.array_equal(before, g.adjacency)
        if r.success:
            assert block_is_ones(g.adjacency, r.rows, r.cols)

    def test_subset_solver_on_clean_block(self):
        # zero background: only subsets inside the block reach frequency k/n
        n, k = 24, 8
        m = np.zeros((n, n), dtype=np.uint8)
        rows, cols = [1, 4, 6, 9, 12, 15, 18, 22], [0, 2, 3, 7, 11, 13, 17, 20]
        m[np.ix_(rows, cols)] = 1
        inst = BipartiteInstance(n, m, IndexSet.of(n, rows), IndexSet.of(n, cols))
        res = empirical_subset_solver(4)(inst, k)
        assert res.success and res.cols.to_list() == cols and res.rows.to_list() == rows

    def test_conditioned_binomial(self):
        rng = make_rng(17)
        draws = [draw_conditioned_binomial(64, 16, rng)[0] for _ in range(500)]
        assert all(8 < k < 32 for k in draws)
        assert abs(np.mean(draws) - 16) < 1.0


def test_chernoff_value():
    assert chernoff_window_bound(16) == pytest.approx(1 - 2 * math.exp(-2), rel=1e-15)
    assert chernoff_window_bound(16) ** 2 == pytest.approx(0.53192, abs=1e-5)
