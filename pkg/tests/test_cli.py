import csv
import json
import math

import numpy as np
import pytest

from jacobi_wvn import cli, pipelines
from jacobi_wvn.errors import DegeneracyError


def run(tmp_path, command, cfg=None, *extra, name="cfg.json"):
    argv = [command, "--out", str(tmp_path / "out")]
    if cfg is not None:
        if isinstance(cfg, dict):
            path = tmp_path / name
            path.write_text(json.dumps(cfg))
            cfg = str(path)
        argv += ["--config", cfg]
    return cli.main(argv + list(extra))


def read_json(tmp_path, name):
    return json.loads((tmp_path / "out" / name).read_text())


def read_csv(tmp_path, name):
    with open(tmp_path / "out" / name) as fh:
        return list(csv.reader(fh))


FREE = {"a": [1.0], "b": [0.0]}


class TestBands:
    def test_free_chain(self, tmp_path, capsys):
        assert run(tmp_path, "bands", "free_t1") == 0
        doc = read_json(tmp_path, "bands.json")
        assert len(doc["bands"]) == 1
        assert doc["bands"][0]["lo"] == pytest.approx(-2, abs=1e-10)
        assert doc["bands"][0]["hi"] == pytest.approx(2, abs=1e-10)
        rows = read_csv(tmp_path, "bands.csv")
        assert rows[0] == ["index", "lo", "hi", "direction"]
        assert json.loads(capsys.readouterr().out)["bands"] == doc["bands"]

    def test_theta_table_monotone(self, tmp_path):
        assert run(tmp_path, "bands", "t3_generic") == 0
        rows = read_csv(tmp_path, "theta_table.csv")[1:]
        for band in {r[0] for r in rows}:
            th = np.array([float(r[2]) for r in rows if r[0] == band])
            d = np.diff(th)
            assert np.all(d > 0) or np.all(d < 0)

    def test_nonpositive_link(self, tmp_path, capsys):
        assert run(tmp_path, "bands", {"operator": {"a": [1.0, -2.0], "b": [0, 0]}}) == 2
        assert "operator.a[1]" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text('{"operator": {"a": [1.0,]}}')
        assert run(tmp_path, "bands", str(tmp_path / "bad.json")) == 2
        assert "line 1 column" in capsys.readouterr().err

    def test_missing_operator(self, tmp_path, capsys):
        assert run(tmp_path, "bands", {}) == 2
        assert "operator" in capsys.readouterr().err

    def test_unknown_config(self, tmp_path):
        assert run(tmp_path, "bands", "no_such_config") == 2

    def test_floats_keep_17_digits(self, tmp_path):
        run(tmp_path, "bands", "t2_a12")
        text = (tmp_path / "out" / "bands.json").read_text()
        doc = json.loads(text)
        for b in doc["bands"]:
            assert format(b["lo"], ".17g") in text


def test_classify(tmp_path):
    cfg = {"operator": FREE, "lambdas": [0.0, 2.0, 3.0]}
    assert run(tmp_path, "classify", cfg) == 0
    kinds = [p["kind"] for p in read_json(tmp_path, "classify.json")["points"]]
    assert kinds == ["elliptic", "parabolic", "hyperbolic"]


class TestResonance:
    def test_free_plan(self, tmp_path):
        assert run(tmp_path, "resonance", "resonance_t1") == 0
        plan = read_json(tmp_path, "plan.json")["plan"]
        assert plan["omega"] == pytest.approx(4 * math.pi / 3)
        assert plan["c_threshold"] == pytest.approx(math.sqrt(3))

    def test_oracle_check(self, tmp_path):
        assert run(tmp_path, "resonance", "resonance_t2_oracle") == 0
        chk = read_json(tmp_path, "plan.json")["oracle_check"]
        assert chk["comparisons"] > 0 and chk["max_rel_deviation"] <= 1e-10

    def test_case3_off_half_pi(self, tmp_path, capsys):
        cfg = {"operator": FREE, "lambda": 0.5, "case": "case3", "phi": 1.0}
        assert run(tmp_path, "resonance", cfg) == 3
        assert "case3" in capsys.readouterr().err

    def test_case3(self, tmp_path):
        assert run(tmp_path, "resonance", "resonance_case3") == 0
        assert read_json(tmp_path, "plan.json")["plan"]["c_threshold"] == pytest.approx(1.0)

    def test_sweep(self, tmp_path):
        cfg = {"operator": FREE, "lambda": 1.0, "sweep": {"band": 0, "points": 41}}
        assert run(tmp_path, "resonance", cfg) == 0
        rows = read_csv(tmp_path, "sweep.csv")
        assert rows[0] == ["lambda", "abs_E", "exponent_per_c", "c_threshold"]
        # theta = pi/2 is skipped for case 1 and listed
        skipped = read_json(tmp_path, "plan.json")["sweep"]["skipped"]
        assert skipped == [pytest.approx(0.0, abs=1e-12)]
        assert len(rows) - 1 + len(skipped) == 39

    def test_sweep_bad_band(self, tmp_path):
        cfg = {"operator": FREE, "lambda": 1.0, "sweep": {"band": 3}}
        assert run(tmp_path, "resonance", cfg) == 2

    def test_outside_band(self, tmp_path):
        assert run(tmp_path, "resonance", {"operator": FREE, "lambda": 2.5}) == 3


class TestSimulate:
    def test_resonant(self, tmp_path):
        assert run(tmp_path, "simulate", "simulate_resonant", "--quick") == 0
        doc = read_json(tmp_path, "simulate.json")
        assert doc["verdict"] == "Decaying"
        assert doc["fit"]["rel_error"] <= 0.05
        fit = read_json(tmp_path, "fit.json")
        assert set(fit) == {"timestamp", "gamma", "stderr", "window", "verdict"}
        rows = read_csv(tmp_path, "trace.csv")
        assert rows[0] == ["n", "u_n"] or rows[0] == ["n", "u_n", "log10_scale"]

    def test_nonresonant(self, tmp_path):
        assert run(tmp_path, "simulate", "simulate_nonresonant") == 0
        doc = read_json(tmp_path, "simulate.json")
        assert doc["subordination"]["verdict"] == "NoSubordinate"
        assert doc["boundedness"]["sub"]["verdict"] == "Bounded"
        assert doc["boundedness"]["generic"]["verdict"] == "Bounded"

    def test_free_flat_envelope(self, tmp_path):
        assert run(tmp_path, "simulate", "simulate_free") == 0
        doc = read_json(tmp_path, "simulate.json")
        assert doc["boundedness"]["verdict"] == "Bounded"
        assert doc["boundedness"]["sup_ratio"] == pytest.approx(1.0, abs=1e-6)

    def test_hyperbolic_growth_written_split(self, tmp_path):
        assert run(tmp_path, "simulate", "simulate_hyperbolic") == 0
        assert read_json(tmp_path, "simulate.json")["verdict"] == "Growing"
        rows = read_csv(tmp_path, "trace.csv")
        assert rows[0] == ["n", "u_n", "log10_scale"]
        assert all(math.isfinite(float(x)) for r in rows[1:] for x in r)

    def test_overflow_exit(self, tmp_path, capsys):
        cfg = {"operator": FREE, "lambda": 3.0, "N": 5000, "mode": "head", "rescale": False}
        assert run(tmp_path, "simulate", cfg) == 4
        assert "n=" in capsys.readouterr().err

    def test_bad_mode(self, tmp_path):
        assert run(tmp_path, "simulate", {"operator": FREE, "lambda": 0.5, "mode": "x",
                                          "N": 20000}) == 2

    def test_too_short(self, tmp_path):
        assert run(tmp_path, "simulate", {"operator": FREE, "lambda": 0.5, "N": 4}) == 2


class TestEmbed:
    def test_single(self, tmp_path):
        assert run(tmp_path, "embed", "embed_single") == 0
        doc = read_json(tmp_path, "embed.json")
        assert doc["eigen_residual"] < 1e-8
        assert doc["tail_fit"]["gamma"] > 0.5

    def test_pair(self, tmp_path):
        assert run(tmp_path, "embed", "embed_pair") == 0
        doc = read_json(tmp_path, "embed.json")
        assert max(doc["eigen_residuals"]) < 1e-8
        assert doc["embedding"]["branch"]
        assert max(doc["boundary_residuals"]) <= 1e-12

    def test_pair_same_target(self, tmp_path):
        cfg = {"operator": FREE, "mode": "pair", "lambdas": [1.0, 1.0]}
        assert run(tmp_path, "embed", cfg) == 2

    def test_degeneracy_exit(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise DegeneracyError("stuck")
        monkeypatch.setattr(pipelines, "pair_embedding", boom)
        cfg = {"operator": FREE, "mode": "pair", "lambdas": [1.0, -1.0]}
        assert run(tmp_path, "embed", cfg) == 5


class TestVerify:
    def test_quick_passes(self, tmp_path):
        assert run(tmp_path, "verify", "verify", "--quick") == 0
        doc = read_json(tmp_path, "verify.json")
        assert doc["ok"] and doc["quick"]
        assert {s["name"] for s in doc["suites"]} == {
            "det_monodromy", "oracle_equivalence", "matched_pair", "zygmund", "partition",
            "exponent_regression"}

    def test_injected_fault(self, tmp_path, capsys):
        cfg = {"operators": [{"a": [1.0, -2.0], "b": [0.0, 0.0]}]}
        assert run(tmp_path, "verify", cfg, "--quick") == 2
        assert "operator.a[1]" in capsys.readouterr().err


def _strip(text):
    doc = json.loads(text)
    doc.pop("timestamp", None)
    return json.dumps(doc, sort_keys=True)


@pytest.mark.parametrize("command, config, files", [
    ("bands", "t3_generic", ["bands.json", "theta_table.csv", "bands.csv"]),
    ("resonance", "resonance_t2_oracle", ["plan.json"]),
    ("simulate", "simulate_nonresonant", ["simulate.json", "fit.json", "trace.csv"]),
    ("embed", "embed_pair", ["embed.json"]),
])
def test_deterministic_outputs(tmp_path, command, config, files):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run(a, command, config) == 0
    assert run(b, command, config) == 0
    for f in files:
        ta = (a / "out" / f).read_text()
        tb = (b / "out" / f).read_text()
        if f.endswith(".json"):
            assert _strip(ta) == _strip(tb)
            assert ta.splitlines()[2:] == tb.splitlines()[2:]
        else:
            assert ta == tb


def test_bundled_configs_listed():
    names = cli.bundled_configs()
    assert "free_t1.json" in names and "verify.json" in names
