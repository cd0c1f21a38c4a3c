import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from sqlab.distributions import (
    DimensionMismatch,
    ParityDistribution,
    PlantedDistribution,
    ReferenceDistribution,
    brute_force_expectation,
    conjunction_expectations,
    draw,
    draw_many,
    exact_expectation,
    load_instance,
    mass,
    ratio_deviation,
    save_instance,
)
from sqlab.points import IndexSet, Point
from sqlab.queries import Conjunction, Constant, Coordinate, Parity, Tabulated
from sqlab.rng import make_rng


def oracle_mass(n, plant, p, q, x):
    """Sum over both mixture branches, coordinate by coordinate."""
    bits = [(x >> i) & 1 for i in range(n)]
    w = Fraction(len(plant), n)
    bg = Fraction(1)
    pl = Fraction(1)
    for i, b in enumerate(bits):
        bg *= q if b else 1 - q
        bias = p if i in plant else q
        pl *= bias if b else 1 - bias
    return (1 - w) * bg + w * pl


def point(*coords):
    return Point.from_sequence(list(coords))


class TestMass:
    def test_small_plant_p1(self):
        d = PlantedDistribution(2, IndexSet.of(2, [0]))
        assert mass(d, point(1, 0)) == oracle_mass(2, {0}, 1, Fraction(1, 2), 0b01) == Fraction(3, 8)
        assert mass(d, point(0, 1)) == oracle_mass(2, {0}, 1, Fraction(1, 2), 0b10) == Fraction(1, 8)

    def test_full_plant_is_point_mass(self):
        d = PlantedDistribution(2, IndexSet.of(2, [0, 1]))
        assert d.mix_weight == 1
        assert mass(d, point(1, 1)) == 1
        assert mass(d, point(0, 1)) == 0

    def test_dense_plant(self):
        d = PlantedDistribution(2, IndexSet.of(2, [0]), Fraction(3, 4))
        want = oracle_mass(2, {0}, Fraction(3, 4), Fraction(1, 2), 0b01)
        assert mass(d, point(1, 0)) == want == Fraction(5, 16)

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(1, 7),
        data=st.data(),
        q=st.fractions(Fraction(1, 16), Fraction(15, 16), max_denominator=16),
    )
    def test_matches_branch_oracle_and_sums_to_one(self, n, data, q):
        p = data.draw(st.fractions(q, 1, max_denominator=16))
        plant = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
        d = PlantedDistribution(n, IndexSet.of(n, plant), p, q)
        total = Fraction(0)
        for x in range(1 << n):
            m = mass(d, x)
            assert m == oracle_mass(n, plant, p, q, x)
            total += m
        assert total == 1

    def test_parity_support(self):
        c = IndexSet.of(4, [0, 2])
        d = ParityDistribution(4, c, 1)
        for x in range(16):
            odd = (((x >> 0) & 1) + ((x >> 2) & 1)) % 2
            assert mass(d, x) == (Fraction(1, 8) if odd else 0)

    def test_dimension_mismatch(self):
        d = PlantedDistribution(3, IndexSet.of(3, [0]))
        with pytest.raises(DimensionMismatch):
            mass(d, point(1, 0))

    def test_zero_parity_rejected(self):
        with pytest.raises(ValueError):
            ParityDistribution(3, IndexSet(3, ()), 1)

    def test_bad_biases_rejected(self):
        with pytest.raises(ValueError):
            PlantedDistribution(3, IndexSet.of(3, [0]), Fraction(3, 2))
        with pytest.raises(ValueError):
            PlantedDistribution(3, IndexSet(3, ()))


class TestRatioDeviation:
    def test_two_piece_values(self):
        d = PlantedDistribution(4, IndexSet.of(4, [0, 1]))
        u = d.reference()
        # planted point: (1/2)(1/16) + (1/2)(1/4) over 1/16
        assert ratio_deviation(d, u, point(1, 1, 0, 1)) == Fraction(3, 2)
        assert ratio_deviation(d, u, point(0, 1, 1, 1)) == Fraction(-1, 2)

    def test_dense_point(self):
        d = PlantedDistribution(2, IndexSet.of(2, [0]), Fraction(3, 4))
        assert ratio_deviation(d, d.reference(), point(1, 0)) == Fraction(5, 16) / Fraction(1, 4) - 1

    @pytest.mark.parametrize("n,plant,p", [(3, [1], 1), (5, [0, 3], Fraction(3, 4)), (6, [0, 1, 2], Fraction(3, 5))])
    def test_mean_zero_under_reference(self, n, plant, p):
        d = PlantedDistribution(n, IndexSet.of(n, plant), p)
        u = d.reference()
        assert sum(mass(u, x) * ratio_deviation(d, u, x) for x in range(1 << n)) == 0


class TestSampling:
    def test_goodness_of_fit(self):
        n = 12
        d = PlantedDistribution(n, IndexSet.of(n, [2, 5, 9]))
        X = draw_many(d, make_rng(11), 100_000)
        idx = (X.astype(np.int64) << np.arange(n)).sum(axis=1)
        counts = np.bincount(idx, minlength=1 << n)
        probs = np.array([float(mass(d, x)) for x in range(1 << n)])
        expected = probs * len(X)
        assert chisquare(counts, expected).pvalue > 1e-3
        se = np.sqrt(len(X) * probs * (1 - probs))
        assert np.all(np.abs(counts - expected) <= 4 * se + 1e-9)

    def test_parity_draws_on_support(self):
        c = IndexSet.of(9, [1, 4, 8])
        d = ParityDistribution(9, c, 1)
        X = draw_many(d, make_rng(3), 5000)
        assert np.all(X[:, [1, 4, 8]].sum(axis=1) % 2 == 1)
        neg = draw_many(ParityDistribution(9, c, -1), make_rng(3), 5000)
        assert np.all(neg[:, [1, 4, 8]].sum(axis=1) % 2 == 0)

    def test_deterministic(self):
        d = PlantedDistribution(20, IndexSet.of(20, [3, 7]))
        a = draw_many(d, make_rng(5, 1), 300)
        b = draw_many(d, make_rng(5, 1), 300)
        assert np.array_equal(a, b)
        assert draw(d, make_rng(9)) == draw(d, make_rng(9))


class TestExpectation:
    def test_planted_coordinate(self):
        d = PlantedDistribution(100, IndexSet.of(100, range(10)))
        assert exact_expectation(d, Coordinate(3)) == Fraction(11, 20)
        assert exact_expectation(d, Coordinate(50)) == Fraction(1, 2)

    def test_conjunction_inside_plant(self):
        n = 16
        d = PlantedDistribution(n, IndexSet.of(n, [0, 4, 8, 12]))
        q = Conjunction((0, 4, 8, 12))
        # point-enumeration oracle over all 2^16 points
        assert brute_force_expectation(d, q) == exact_expectation(d, q) == Fraction(19, 64)

    def test_parity_orthogonality(self):
        n = 4
        c = IndexSet.of(n, [1, 3])
        d = ParityDistribution(n, c, 1)
        for r in range(1, n + 1):
            for sub in itertools.combinations(range(n), r):
                want = 1 if set(sub) == {1, 3} else 0
                assert exact_expectation(d, Parity(sub)) == want

    def test_constant(self):
        d = PlantedDistribution(5, IndexSet.of(5, [0]))
        assert exact_expectation(d, Constant(1)) == 1

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 8), data=st.data(), p=st.sampled_from([Fraction(1), Fraction(3, 4), Fraction(3, 5)]))
    def test_closed_forms_match_enumeration(self, n, data, p):
        plant = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
        T = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
        d = PlantedDistribution(n, IndexSet.of(n, plant), p)
        for q in (Coordinate(min(T)), Conjunction(tuple(T)), Parity(tuple(T))):
            assert exact_expectation(d, q) == brute_force_expectation(d, q)

    def test_ratio_deviation_as_query(self):
        n, k = 6, 2
        u = ReferenceDistribution(n, Fraction(1, 2))
        a = PlantedDistribution(n, IndexSet.of(n, [0, 1]))
        b = PlantedDistribution(n, IndexSet.of(n, [1, 2]))
        table = tuple(ratio_deviation(b, u, x) for x in range(1 << n))
        got = sum(mass(u, x) * ratio_deviation(a, u, x) * table[x] for x in range(1 << n))
        # closed form ((1 + (p-q)^2/(q(1-q)))^lam - 1) k^2/n^2 at lam = 1
        assert got == Fraction(k * k, n * n) * (2 - 1)
        assert exact_expectation(a, Tabulated(n, table)) == got

    def test_batch_conjunctions(self):
        n = 10
        d = PlantedDistribution(n, IndexSet.of(n, [0, 1, 2]))
        subsets = np.array([[0, 1], [0, 5], [6, 7]])
        got = conjunction_expectations(d, subsets)
        for row, v in zip(subsets, got):
            assert v == pytest.approx(float(exact_expectation(d, Conjunction(tuple(row)))), rel=1e-12)


def test_instance_roundtrip(tmp_path):
    d = PlantedDistribution(30, IndexSet.of(30, [4, 9, 22]), Fraction(3, 4), Fraction(1, 3))
    path = tmp_path / "inst.json"
    save_instance(path, d, seed=17)
    back, seed = load_instance(path)
    assert back == d and seed == 17


def test_reference_mass():
    u = ReferenceDistribution(3, Fraction(1, 3))
    assert mass(u, 0b101) == Fraction(1, 3) ** 2 * Fraction(2, 3)
    assert math.isclose(sum(float(mass(u, x)) for x in range(8)), 1.0)
