import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlab.distributions import PlantedDistribution, ReferenceDistribution
from sqlab.oracles import make_session, tolerance_of
from sqlab.points import IndexSet
from sqlab.queries import Conjunction, Coordinate
from sqlab.rng import make_rng
from sqlab.simulation import (
    NotApplicable,
    TranscriptDistribution,
    band_edge_high_policy,
    bernoulli_ratio,
    check_simulation,
    chi_square,
    expected_ratio,
    flip_bound_holds,
    random_adaptive_algorithm,
    ratio_bound,
    sample_policy,
    simulate_samples_via_vstat,
    simulation_t,
    transcript_distribution,
    transcript_law,
    tv_distance,
    tv_from_chi_square_bound,
)

HALF = Fraction(1, 2)


def bernoulli_law(p):
    return TranscriptDistribution(1, {(1,): p, (0,): 1 - p})


class TestTranscriptLaw:
    def test_uniform(self):
        law = transcript_law(2, lambda z: HALF)
        assert all(law[z] == Fraction(1, 4) for z in product((0, 1), repeat=2))

    def test_adaptive(self):
        # first coin fair, second coin 0.7 after a 1 and 0.3 after a 0
        law = transcript_law(2, lambda z: HALF if not z else (Fraction(7, 10) if z[0] else Fraction(3, 10)))
        by_hand = {(0, 0): HALF * Fraction(7, 10), (0, 1): HALF * Fraction(3, 10), (1, 0): HALF * Fraction(3, 10), (1, 1): HALF * Fraction(7, 10)}
        assert dict(law.probabilities) == by_hand
        assert [float(law[z]) for z in ((0, 0), (0, 1), (1, 0), (1, 1))] == [0.35, 0.15, 0.15, 0.35]

    @settings(max_examples=50, deadline=None)
    @given(m=st.integers(1, 6), seed=st.integers(0, 10**6))
    def test_mass_sums_to_one(self, m, seed):
        rng = make_rng(seed)
        d = PlantedDistribution(5, IndexSet.of(5, [0, 2]))
        alg = random_adaptive_algorithm(5, m, rng)
        for pol in (sample_policy, band_edge_high_policy(17)):
            assert transcript_distribution(alg, m, d, pol, t=17 if pol is not sample_policy else None).total() == 1

    def test_guard(self):
        with pytest.raises(ValueError):
            transcript_law(17, lambda z: HALF)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tv_distance(bernoulli_law(HALF), transcript_law(2, lambda z: HALF))


class TestDistances:
    def test_tv_examples(self):
        assert tv_distance(bernoulli_law(HALF), bernoulli_law(HALF)) == 0
        assert tv_distance(bernoulli_law(HALF), bernoulli_law(Fraction(3, 5))) == Fraction(1, 10)

    def test_chi_square_bound_example(self):
        a, b = bernoulli_law(HALF), bernoulli_law(Fraction(11, 20))
        rho = chi_square(a, b)
        assert rho == Fraction(1, 99)
        assert tv_distance(a, b) == Fraction(1, 20)
        assert tv_from_chi_square_bound(rho) == pytest.approx(0.050252, abs=1e-6)
        assert tv_from_chi_square_bound(rho) >= 0.05

    def test_ratio_examples(self):
        assert bernoulli_ratio(Fraction(3, 10), Fraction(3, 10)) == 1
        r = bernoulli_ratio(HALF, Fraction(11, 20))
        assert r == Fraction(100, 99) and r <= ratio_bound(100)
        r0 = bernoulli_ratio(0, Fraction(1, 100))
        assert r0 == 1 + Fraction(1, 10**4) / Fraction(99, 10**4) == Fraction(100, 99)
        with pytest.raises(ValueError):
            bernoulli_ratio(HALF, 0)

    def test_expected_ratio_is_product_of_ratios(self):
        a = transcript_law(3, lambda z: Fraction(1, 3))
        b = transcript_law(3, lambda z: Fraction(2, 5))
        assert expected_ratio(a, b) == bernoulli_ratio(Fraction(1, 3), Fraction(2, 5)) ** 3

    def test_chi_square_arrays(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10))
            tv = 0.5 * np.abs(a - b).sum()
            assert tv <= tv_from_chi_square_bound(chi_square(a, b)) + 1e-12


class TestFlipBound:
    def test_examples(self):
        assert flip_bound_holds(Fraction(1, 4), Fraction(1, 5), 100)
        assert math.sqrt(0.2 / 300) == pytest.approx(0.02582, abs=1e-5)
        assert flip_bound_holds(0, Fraction(1, 100), 100)
        assert math.sqrt(0.01 / 300) == pytest.approx(0.00577, abs=1e-5)

    def test_not_applicable(self):
        with pytest.raises(NotApplicable):
            flip_bound_holds(HALF, Fraction(51, 100), 100)

    @settings(max_examples=300, deadline=None)
    @given(a=st.integers(0, 1000), b=st.integers(0, 1000), t=st.integers(2, 10**5))
    def test_symmetric_and_true(self, a, b, t):
        p, pp = Fraction(a, 1000), Fraction(b, 1000)
        try:
            v = flip_bound_holds(p, pp, t)
        except NotApplicable:
            with pytest.raises(NotApplicable):
                flip_bound_holds(1 - p, 1 - pp, t)
            return
        assert v == flip_bound_holds(1 - p, 1 - pp, t)
        assert v


class TestSimulation:
    def test_parameter(self):
        assert simulation_t(8, Fraction(1, 4)) == 128
        assert simulation_t(1, Fraction(1, 10)) == 100
        with pytest.raises(ValueError):
            simulation_t(3, Fraction(3, 4))

    def test_one_query_exact_is_identical(self):
        d = PlantedDistribution(4, IndexSet.of(4, [0, 1]))
        alg = lambda z: Coordinate(0)
        truth = transcript_distribution(alg, 1, d)
        sim = transcript_distribution(alg, 1, d, lambda q, p: p, t=100)
        assert tv_distance(truth, sim) == 0

    def test_one_query_band_edge(self):
        p = HALF
        pp = p + Fraction(tolerance_of(100, 0.5)).limit_denominator(100)
        assert pp == Fraction(11, 20)
        assert tv_distance(bernoulli_law(p), bernoulli_law(pp)) == Fraction(1, 20) <= Fraction(1, 10)

    def test_desk_scale(self):
        d = PlantedDistribution(6, IndexSet.of(6, [1, 4]))
        alg = random_adaptive_algorithm(6, 8, make_rng(5))
        diags = check_simulation(alg, 8, d, Fraction(1, 4), ref=d.reference())
        assert {x.policy for x in diags} == {"exact", "band-edge-high", "band-edge-low", "adversarial"}
        for x in diags:
            assert x.t == 128 and x.tv_pass and x.ratio_pass
            assert x.ratio_bound == (1 + Fraction(2, 128)) ** 8

    def test_live_simulation(self):
        d = PlantedDistribution(6, IndexSet.of(6, [0, 3]))
        alg = lambda z: Conjunction((0, 3)) if len(z) % 2 else Coordinate(len(z) % 6)
        s = make_session("VSTAT", d, "exact", t=simulation_t(6, Fraction(1, 2)))
        bits = simulate_samples_via_vstat(s, alg, 6, make_rng(0))
        assert len(bits) == 6 and set(bits) <= {0, 1}
        assert s.query_count == 6

    def test_live_simulation_needs_vstat(self):
        s = make_session("STAT", ReferenceDistribution(2, HALF), "exact", tau=0.1)
        with pytest.raises(ValueError):
            simulate_samples_via_vstat(s, lambda z: Coordinate(0), 1, make_rng(0))

    def test_live_law_matches_exact(self):
        # empirical frequencies of the simulated transcript against the exact simulated law
        d = PlantedDistribution(4, IndexSet.of(4, [0, 1]))
        alg = lambda z: Coordinate(1) if z and z[0] else Conjunction((0, 1))
        t = simulation_t(2, HALF)
        law = transcript_distribution(alg, 2, d, lambda q, p: p, t=t)
        s = make_session("VSTAT", d, "exact", t=t, record=False)
        rng = make_rng(1)
        counts = {}
        trials = 20_000
        for _ in range(trials):
            z = simulate_samples_via_vstat(s, alg, 2, rng)
            counts[z] = counts.get(z, 0) + 1
        for z, pz in law.probabilities.items():
            se = math.sqrt(float(pz) * (1 - float(pz)) / trials)
            assert abs(counts.get(z, 0) / trials - float(pz)) <= 4 * se + 1e-12
