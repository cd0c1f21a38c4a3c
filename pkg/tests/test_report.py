import csv
import json
import math
import os
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlab.report import ExperimentReport, aggregate, atomic_write, load_report, wilson_interval


def wilson_by_hand(s, n, z=1.959963984540054):
    p = s / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


class TestWilson:
    def test_example(self):
        lo, hi = wilson_interval(95, 100)
        assert (lo, hi) == pytest.approx(wilson_by_hand(95, 100), abs=1e-9)
        assert round(lo, 5) == 0.88825 and round(hi, 5) == 0.97846

    @settings(max_examples=100, deadline=None)
    @given(n=st.integers(1, 2000), data=st.data())
    def test_matches_formula(self, n, data):
        s = data.draw(st.integers(0, n))
        lo, hi = wilson_interval(s, n)
        elo, ehi = wilson_by_hand(s, n)
        assert lo == pytest.approx(max(elo, 0.0), abs=1e-9)
        assert hi == pytest.approx(min(ehi, 1.0), abs=1e-9)
        assert lo <= s / n <= hi

    def test_zero_trials(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)


class TestAggregate:
    def test_all_failures(self):
        agg = aggregate([{"seed": i, "success": False, "queries": 3} for i in range(20)])
        assert agg["successRate"] == 0 and agg["wilson95"][0] == 0
        assert not agg["lowPower"]

    def test_low_power(self):
        assert aggregate([{"seed": 0, "success": True}])["lowPower"]

    def test_counters(self):
        agg = aggregate([{"seed": 0, "success": True, "queries": 4}, {"seed": 1, "success": False, "queries": 10}])
        assert agg["mean_queries"] == 7 and agg["max_queries"] == 10
        assert "mean_seed" not in agg and agg["successes"] == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestReport:
    def make(self):
        trials = [{"seed": i, "success": i % 2 == 0, "value": Fraction(i, 3)} for i in range(4)]
        return ExperimentReport("demo", {"n": 4}, trials, formula_values={"bound": Fraction(1, 8)}).finalize(4)

    def test_seed_required(self):
        with pytest.raises(ValueError):
            ExperimentReport("x", {}, [{"success": True}]).finalize()

    def test_trial_count_checked(self):
        with pytest.raises(ValueError):
            ExperimentReport("x", {}, [{"seed": 0, "success": True}]).finalize(2)

    def test_json_and_csv(self, tmp_path):
        rep = self.make()
        jpath, cpath = rep.write(tmp_path / "r.json")
        assert cpath.endswith("r.csv")
        data = load_report(jpath)
        assert data["schemaVersion"] == 1 and data["experimentId"] == "demo"
        assert data["formulaValues"]["bound"] == 0.125
        assert data["aggregates"]["successRate"] == 0.5
        with open(cpath) as fh:
            rows = list(csv.DictReader(fh))
        assert [r["seed"] for r in rows] == ["0", "1", "2", "3"]
        assert float(rows[2]["value"]) == pytest.approx(2 / 3)
        assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]

    def test_schema_check(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"schemaVersion": 99}))
        with pytest.raises(ValueError):
            load_report(p)


def test_atomic_write_keeps_old_file_on_failure(tmp_path, monkeypatch):
    p = tmp_path / "a.txt"
    atomic_write(p, "old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write(p, "new")
    assert p.read_text() == "old"
    assert os.listdir(tmp_path) == ["a.txt"]
