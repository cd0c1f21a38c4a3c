import json

import pytest

from sqlab.cli import main
from sqlab.report import load_report


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def instance(tmp_path, capsys):
    path = str(tmp_path / "inst.json")
    assert main(["gen", "--n", "40", "--k", "8", "--seed", "3", "--out", path]) == 0
    capsys.readouterr()
    return path


class TestGenDetect:
    def test_gen_reports_plant(self, capsys, tmp_path):
        path = str(tmp_path / "g.json")
        code, out, _ = run(capsys, "gen", "--n", "10", "--k", "3", "--plant", "1,4,7", "--out", path)
        body = json.loads(out)
        assert code == 0 and body["plant"] == [1, 4, 7] and body["verified"]

    def test_gen_with_matrix(self, capsys, tmp_path):
        path, mpath = str(tmp_path / "g.json"), str(tmp_path / "m.txt")
        code, _, _ = run(capsys, "gen", "--n", "12", "--k", "4", "--out", path, "--matrix", mpath)
        assert code == 0
        side = json.loads(open(mpath + ".json").read())
        assert len(side["plantCols"]) == 4

    def test_detect_exact(self, capsys, instance, tmp_path):
        out = str(tmp_path / "d.json")
        tr = str(tmp_path / "t.jsonl")
        code, _, _ = run(capsys, "detect", "--algo", "coords", "--instance", instance, "--out", out, "--transcript", tr)
        rep = load_report(out)
        assert code == 0 and rep["trials"][0]["success"]
        assert rep["parameters"]["t"] == 400
        assert len(open(tr).read().splitlines()) == 40

    def test_detect_adversarial_fails(self, capsys, instance):
        code, out, _ = run(capsys, "detect", "--algo", "coords", "--instance", instance, "--backend", "adversarial", "--t", "10")
        assert code == 1 and not json.loads(out)["trials"][0]["success"]

    def test_detect_subsets(self, capsys, tmp_path):
        path = str(tmp_path / "s.json")
        main(["gen", "--n", "16", "--k", "4", "--out", path])
        code, _, _ = run(capsys, "detect", "--algo", "subsets", "--instance", path)
        assert code == 0


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["gen", "--n", "5", "--k", "9", "--out", "x.json"],
            ["gen", "--n", "5", "--k", "2", "--p", "1/4", "--q", "1/2", "--out", "x.json"],
            ["gen", "--n", "5", "--k", "2"],
            ["detect", "--algo", "coords", "--instance", "/nonexistent/inst.json"],
            ["maxxorsat", "--n", "70"],
            ["dim", "clique", "--n", "100"],
            ["simulate", "--delta-prime", "3/4"],
        ],
    )
    def test_exit_two(self, capsys, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, err = run(capsys, *argv)
        assert code == 2 and "error" in err

    def test_malformed_instance(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        code, _, err = run(capsys, "detect", "--algo", "coords", "--instance", str(bad))
        assert code == 2 and "error" in err

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["dim", "nonsense"])
        assert e.value.code == 2

    def test_bad_env(self, capsys, monkeypatch):
        monkeypatch.setenv("SQLAB_ARITH", "decimal")
        code, _, _ = run(capsys, "dim", "sqdim", "--dprime", "1000")
        assert code == 2


class TestDim:
    def test_clique(self, capsys):
        code, out, _ = run(capsys, "dim", "clique", "--n", str(2**20), "--k", str(2**8), "--delta", "1/10", "--ell", "5")
        est = json.loads(out)["estimate"]
        assert code == 0 and est["d"] == 2**18 and est["gammaBar"] == 2**-17

    def test_sd(self, capsys):
        code, out, _ = run(capsys, "dim", "sd", "--m", "100", "--gamma", "1/100", "--beta", "1", "--gamma-prime", "1/50", "--tau", "1/2")
        body = json.loads(out)
        assert code == 0 and body["sdaLowerBound"] == "100/99"

    def test_sqdim(self, capsys, tmp_path):
        out = str(tmp_path / "b.json")
        code, _, _ = run(capsys, "dim", "sqdim", "--dprime", "1000", "--out", out)
        body = json.loads(open(out).read())
        assert code == 0 and body["queryBound"] == 8 and body["sdLowerBound"] == pytest.approx(8000 / 9)

    def test_dense_csv(self, tmp_path, capsys):
        out = str(tmp_path / "d.json")
        code, _, _ = run(capsys, "dim", "dense", "--n", "1000", "--k", "10", "--delta", "0.1", "--ell", "4", "--p", "3/5", "--q", "1/2", "--out", out)
        assert code == 0 and (tmp_path / "d.csv").exists()


class TestExperiments:
    def test_maxxorsat(self, capsys, tmp_path):
        out = str(tmp_path / "x.json")
        code, _, _ = run(capsys, "maxxorsat", "--n", "12", "--trials", "5", "--budget", "100", "--out", out)
        rep = load_report(out)
        assert code == 0 and len(rep["trials"]) == 5
        assert rep["formulaValues"]["fractionAtMostHalfPlusTau"] >= 0.6
        assert rep["config"]["threads"] == 1 and rep["config"]["arith"] == "exact"

    def test_maxxorsat_threads_match_serial(self, capsys, tmp_path, monkeypatch):
        a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        main(["maxxorsat", "--n", "8", "--trials", "4", "--budget", "50", "--seed", "5", "--out", a])
        monkeypatch.setenv("SQLAB_THREADS", "2")
        main(["maxxorsat", "--n", "8", "--trials", "4", "--budget", "50", "--seed", "5", "--out", b])
        ra, rb = load_report(a), load_report(b)
        assert ra["trials"] == rb["trials"] and rb["config"]["threads"] == 2

    def test_simulate(self, capsys):
        code, out, _ = run(capsys, "simulate", "--algorithms", "2", "--m", "4")
        rep = json.loads(out)
        assert code == 0 and len(rep["trials"]) == 8

    def test_reduce(self, capsys, tmp_path):
        out = str(tmp_path / "r.json")
        code, _, _ = run(capsys, "reduce", "dist2avg", "--n", "64", "--k", "16", "--trials", "40", "--out", out)
        rep = load_report(out)
        assert code == 0 and rep["aggregates"]["trials"] == 40
        assert (tmp_path / "r.csv").exists()

    def test_reduce_rejects_huge_enumeration(self, capsys):
        code, _, _ = run(capsys, "reduce", "avg2dist", "--n", "64", "--k", "16", "--solver", "subsets", "--trials", "1")
        assert code == 2

    def test_verify_suite(self, capsys):
        code, _, err = run(capsys, "verify", "--suite", "parity", "--nmax", "8")
        assert code == 0 and "PASS" in err
