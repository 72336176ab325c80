import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from curvlab import generators as gen
from curvlab import report
from curvlab.chain import MarkovChain, build_chain
from curvlab.curvature import min_kappa
from curvlab.cli import main
from curvlab.functional import OptConfig
from curvlab.verify import (ALL_THEOREMS, REGISTRY, VerifyConfig, compare,
                            counterexample_program, default_battery, run_battery, skipped, verify)

from conftest import c4

QUICK = VerifyConfig(opt=OptConfig(restarts=8), samples=10)


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def negative_instances():
    """Injected fixtures with some negatively curved edge."""
    w = np.zeros((6, 6))
    for a, b in [(0, 1), (0, 2), (1, 3), (1, 4), (0, 5)]:
        w[a, b] = w[b, a] = 1.0
    stars = MarkovChain.from_weights(w, m=np.ones(6))
    tree = gen.lazify(stars)
    er = gen.erdos_renyi(7, 0.4, np.random.default_rng(5))
    return [("stars", stars), ("lazy-stars", tree), ("er", er)]


class TestGenerate:
    def test_cycle_fixture(self):
        spec = gen.generate("cycle", {"n": 4, "rate": 0.5})
        c = build_chain(spec)
        assert np.allclose(c.P, c4().P) and np.allclose(c.m, 0.25)
        assert spec["provenance"]["family"] == "cycle"

    def test_counterexample(self):
        c = build_chain(gen.generate("counterexample", {"eps": 0.1}))
        assert np.allclose(c.P[[0, 1, 1, 2], [1, 0, 2, 1]], [1, 10, 1, 20])

    def test_hypercube(self):
        c = build_chain(gen.generate("hypercube", {"d": 3}))
        assert c.n == 8 and np.allclose(c.P[c.adjacency], 1 / 3) and np.allclose(c.m, 1 / 8)

    def test_seeded_determinism(self):
        a = gen.generate("erdos_renyi", {"n": 8, "p": 0.4}, seed=5)
        b = gen.generate("erdos_renyi", {"n": 8, "p": 0.4}, seed=5)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    @pytest.mark.parametrize("family,params", [("path", {"n": 1}), ("cycle", {"n": 2}),
                                               ("hypercube", {"d": 0}), ("counterexample", {"eps": 2.0}),
                                               ("nonsense", {})])
    def test_invalid(self, family, params):
        with pytest.raises(ValueError):
            gen.generate(family, params)

    def test_lazify_measure(self):
        base = gen.path(4, 2.0)
        lz = gen.lazify(base)
        assert lz.is_lazy
        expected = base.m * base.deg
        assert np.allclose(lz.m, expected / expected.sum())


class TestVerifyExamples:
    def test_cycle_T2(self):
        (r,) = verify(c4(), ["T2"], QUICK, "C4")
        assert r.status == "pass" and math.isclose(r.rhs, 0.5 / 64)
        assert r.lhs >= r.rhs

    def test_counterexample_T1_skipped(self):
        (r,) = verify(gen.counterexample(1e-4), ["T1"], QUICK, "GEPS")
        assert r.status == "skipped" and r.passed is None

    def test_counterexample_T1_after_lazify_names_edge(self):
        (r,) = verify(gen.lazify(gen.counterexample(0.01), "uniform"), ["T1"], QUICK, "lazy GEPS")
        assert r.status == "skipped" and "edge" in r.hypothesis

    def test_counterexample_program_shape(self):
        res = counterexample_program(QUICK)
        by = {r.instance: r for r in res}
        assert by["sweep[kappa]"].status == "pass"
        assert by["sweep[decreasing]"].status == "pass"
        # the ratio limb is reported as computed; see the ratio test in the functional suite
        assert by["sweep[ratio<1]"].status in ("pass", "fail")
        assert by["sweep[ratio<1]"].passed == (by["sweep[ratio<1]"].lhs < 1)

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            verify(c4(), ["T99"])


class TestResultContract:
    @pytest.mark.parametrize("lhs,rhs,rel,status", [(1.0, 0.5, ">=", "pass"), (0.5, 1.0, ">=", "fail"),
                                                    (0.5, 1.0, "<=", "pass"), (1.0, 1.0 + 1e-9, ">=", "pass"),
                                                    (1.0, 1.0 + 1e-7, ">=", "fail"),
                                                    (1e6, 1e6 * (1 + 5e-9), ">=", "pass")])
    def test_margin_rule(self, lhs, rhs, rel, status):
        r = compare("T0", "x", "h", lhs, rhs, rel)
        assert r.status == status
        assert r.passed == (r.margin >= -1e-8 * max(1, abs(lhs), abs(rhs)))

    def test_skip_is_not_pass(self):
        r = skipped("T0", "x", "hypothesis fails")
        assert r.status == "skipped" and r.passed is None and r.margin is None

    @pytest.mark.parametrize("name,chain", negative_instances(), ids=lambda v: v if isinstance(v, str) else "")
    def test_hypothesis_gating(self, name, chain):
        assert min_kappa(chain) < 0
        curvature_gated = ("T1", "T2", "T3", "T4", "T6", "T7", "T13", "T14")
        results = verify(chain, curvature_gated, QUICK, name)
        for r in results:
            if r.theorem in ("T13",) and "lip_decay" in r.instance:
                continue  # Lipschitz decay uses K = min κ, so it applies to every chain
            if r.theorem == "T14":
                if not gen.is_birth_death(chain):
                    assert r.status == "skipped"
                continue
            assert r.status == "skipped", (r.theorem, r.instance, r.hypothesis)


class TestReport:
    def sample(self):
        return [compare("T2", "C4", "ok", 1.0, 0.5), compare("T3", "C4", "ok", 0.1, 0.5),
                skipped("T1", "C4", "not lazy")]

    def test_empty(self):
        for fmt in report.FORMATS:
            text = report.render([], fmt, {"seed": 0})
            assert text.endswith("\n")
        rows = list(csv.reader(io.StringIO(report.render([], "csv"))))
        assert rows == [list(report.FIELDS)]
        lines = [json.loads(l) for l in report.render([], "json-lines", {"seed": 0}).splitlines()]
        assert lines[0]["type"] == "header" and lines[-1] == {"type": "summary", "pass": 0, "fail": 0, "skipped": 0}

    def test_single(self):
        r = compare("T2", "C4", "ok", 1.0, 0.5)
        rows = list(csv.DictReader(io.StringIO(report.render([r], "csv"))))
        assert len(rows) == 1 and float(rows[0]["margin"]) >= 0
        assert report.exit_code([r]) == 0

    def test_mixed(self):
        res = self.sample()
        assert report.exit_code(res) == 1
        assert report.exit_code([res[0], res[2]]) == 0
        lines = [json.loads(l) for l in report.render(res, "json-lines", {}).splitlines()]
        assert [l["type"] for l in lines] == ["header", "result", "result", "result", "summary"]
        assert list(lines[1])[1:] == list(report.FIELDS)

    def test_nonfinite_serialized(self):
        r = compare("T7", "C4", "ok", math.inf, 1.0)
        line = report.render([r], "json-lines", {}).splitlines()[1]
        assert json.loads(line)["lhs"] == "inf"

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            report.render([], "xml")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            report.write([], tmp_path / "missing" / "x.csv", "csv")


class TestBattery:
    def test_composition(self):
        ids = [i.id for i in default_battery()]
        assert len(ids) == len(set(ids))
        for needle in ("path(n=8)", "cycle(n=12)", "hypercube(d=4)", "complete(n=8)", "birth_death(n=10",
                       "lazify[uniform](cycle,6)", "counterexample(eps=1e-08)"):
            assert any(needle in i for i in ids), needle

    def test_parallel_order_matches_serial(self):
        insts = default_battery()[:4]
        a = run_battery(insts, ["T2", "T5"], QUICK, threads=1)
        b = run_battery(insts, ["T2", "T5"], QUICK, threads=2)
        strip = lambda rs: [(r.theorem, r.instance, r.status, r.lhs, r.rhs) for r in rs]
        assert strip(a) == strip(b)

    def test_registry(self):
        assert set(REGISTRY) == {f"T{k}" for k in range(1, 15)} and "CX" in ALL_THEOREMS


class TestCLI:
    def test_gen_then_verify(self, tmp_path, capsys):
        spec = tmp_path / "c4.json"
        assert run_cli(capsys, "gen", "cycle", "n=4", "rate=0.5", "-o", spec)[0] == 0
        code, out, _ = run_cli(capsys, "verify", spec, "--theorems", "T2", "--format", "csv")
        assert code == 0
        (row,) = csv.DictReader(io.StringIO(out))
        assert row["status"] == "pass" and float(row["rhs"]) == 0.0078125

    def test_structured_output_is_byte_deterministic(self, tmp_path, capsys):
        spec = tmp_path / "p.json"
        run_cli(capsys, "gen", "birth_death", "n=5", "monotone=true", "lazy=true", "--seed", 3, "-o", spec)
        args = ["verify", spec, "--theorems", "T1,T9,T13", "--format", "json-lines", "--restarts", 8,
                "--samples", 10, "--seed", 4]
        outs = [run_cli(capsys, *args)[1] for _ in range(2)]
        assert outs[0] == outs[1]
        header = json.loads(outs[0].splitlines()[0])
        assert header["version"] == report.__version__ and header["seed"] == 4
        assert header["check_tol"] == 1e-8 and header["tolerances"]["lip"] == 1e-9

    def test_failure_exit_code(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "verify", tmp_path / "missing.json", "--theorems", "CX")
        assert code == 2
        spec = tmp_path / "t2.json"
        run_cli(capsys, "gen", "path", "n=2", "-o", spec)
        code, out, _ = run_cli(capsys, "verify", spec, "--theorems", "CX", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == (1 if any(r["status"] == "fail" for r in rows) else 0)

    @pytest.mark.parametrize("doc", [{"vertices": ["a", "b"], "edges": [{"u": "a", "v": "b", "P": -1}]},
                                     {"vertices": ["a", "b"], "edges": [{"u": "a", "v": "b", "w": -1}]},
                                     {"vertices": ["a", "b"], "edges": [{"u": "a", "v": "z", "w": 1}]},
                                     {"edges": []}])
    def test_bad_spec(self, tmp_path, capsys, doc):
        spec = tmp_path / "bad.json"
        spec.write_text(json.dumps(doc))
        code, _, err = run_cli(capsys, "curvature", spec)
        assert code == 2 and err.startswith("curvlab: error")

    @pytest.mark.parametrize("cmd", [["curvature", "--sectional"], ["spectral", "--dirichlet", "0"],
                                     ["logsob", "--restarts", "4"], ["isoperimetry", "--eps", "0.125,0.25"],
                                     ["separate", "--split", "0,1"]])
    def test_subcommands(self, tmp_path, capsys, cmd):
        spec = tmp_path / "c.json"
        run_cli(capsys, "gen", "lazify", 'base={"family": "cycle", "params": {"n": 4}}', "-o", spec)
        code, out, err = run_cli(capsys, cmd[0], spec, *cmd[1:], "--format", "json-lines")
        assert code == 0, err
        lines = [json.loads(l) for l in out.splitlines()]
        assert lines[0]["type"] == "header" and len(lines) > 1

    def test_console_script(self, tmp_path):
        exe = shutil.which("curvlab")
        assert exe is not None
        out = subprocess.run([exe, "gen", "path", "n=3"], capture_output=True, text=True, check=True).stdout
        assert build_chain(json.loads(out)).n == 3
