import json
import math
import subprocess
import sys

import pytest

from conecraft.cli import main
from conecraft.cone import trace_cone
from conecraft.scheme import parse_scheme


@pytest.fixture
def dmera_file(tmp_path):
    path = tmp_path / "d.json"
    assert main(["scheme", "build", "--preset", "dmera", "--T", "3", "--D", "1", "--gates", "random", "--seed", "7", "-o", str(path)]) == 0
    return path


def manifest_of(path):
    return json.loads((path.parent / (path.name + ".manifest.json")).read_text())


class TestSchemeCommand:
    def test_build(self, dmera_file):
        s = parse_scheme(dmera_file.read_text())
        assert len(s.live_wires(s.T)) == 8
        m = manifest_of(dmera_file)
        assert m["command"] == "scheme build" and m["seed"] == 7 and m["params"]["T"] == 3
        assert {"version", "timestamp", "inputs"} <= set(m)

    def test_missing_T(self, capsys):
        assert main(["scheme", "build", "--preset", "dmera", "--D", "1"]) == 2
        assert "--T" in capsys.readouterr().err

    def test_bad_combination(self, capsys):
        assert main(["scheme", "build", "--preset", "ri", "--T", "2", "--D", "1", "--dim", "1"]) == 2
        assert "--side" in capsys.readouterr().err

    def test_bad_values(self):
        assert main(["scheme", "build", "--preset", "dmera", "--T", "3", "--D", "0"]) == 2

    def test_deterministic(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            p = tmp_path / name
            main(["scheme", "build", "--preset", "mps", "--T", "4", "--bath", "2", "--D", "2", "--seed", "3", "-o", str(p)])
            outs.append(p.read_bytes())
            m = manifest_of(p)
            m.pop("timestamp")
            outs.append(json.dumps(m))
        assert outs[0] == outs[2] and outs[1] == outs[3]

    def test_ri_build(self, tmp_path):
        p = tmp_path / "r.json"
        assert main(["scheme", "build", "--preset", "ri", "--T", "2", "--D", "1", "--dim", "2", "--side", "2", "-o", str(p)]) == 0
        assert parse_scheme(p.read_text()).bath_size == 4

    def test_info(self, dmera_file, capsys):
        assert main(["scheme", "info", "--scheme", str(dmera_file)]) == 0
        out = capsys.readouterr()
        assert "final   8 qubits" in out.out
        assert json.loads(out.err)["inputs"]


class TestConeCommand:
    def test_matches_library(self, dmera_file, capsys):
        assert main(["cone", "--scheme", str(dmera_file), "--support", "3,4", "--from-iter", "0", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        cone = trace_cone(parse_scheme(dmera_file.read_text()), [3, 4], 0)
        assert (doc["N_U"], doc["N_Q"]) == (cone.N_U, cone.N_Q)

    def test_identity_scheme(self, tmp_path, capsys):
        p = tmp_path / "id.json"
        main(["scheme", "build", "--preset", "dmera", "--T", "2", "--D", "2", "--gates", "swap", "-o", str(p)])
        doc = json.loads(p.read_text())
        for it in doc["iterations"]:
            for layer in it["layers"]:
                for g in layer:
                    g["gate"] = {"name": "ID"}
        p.write_text(json.dumps(doc))
        assert main(["cone", "--scheme", str(p), "--support", "1", "--from-iter", "0"]) == 0
        assert "N_U 0" in capsys.readouterr().out

    def test_emit_circuit(self, dmera_file, tmp_path):
        c = tmp_path / "c.json"
        assert main(["cone", "--scheme", str(dmera_file), "--support", "5", "--from-iter", "1", "--emit-circuit", str(c)]) == 0
        doc = json.loads(c.read_text())
        assert doc["observable_support"] == [5]
        assert (tmp_path / "c.json.manifest.json").exists()

    def test_unknown_qubit(self, dmera_file):
        assert main(["cone", "--scheme", str(dmera_file), "--support", "99", "--from-iter", "0"]) == 2

    def test_bad_iteration(self, dmera_file):
        assert main(["cone", "--scheme", str(dmera_file), "--support", "1", "--from-iter", "7"]) == 2


class TestMixingCommand:
    def test_profile_identity_scheme(self, tmp_path, capsys):
        p = tmp_path / "m.json"
        main(["scheme", "build", "--preset", "mps", "--T", "4", "--D", "1", "--gates", "swap", "-o", str(p)])
        doc = json.loads(p.read_text())
        for it in doc["iterations"]:
            for layer in it["layers"]:
                for g in layer:
                    g["gate"] = {"name": "ID"}
        p.write_text(json.dumps(doc))
        capsys.readouterr()
        assert main(["mixing", "profile", "--scheme", str(p), "--observable", "Z@0"]) == 0
        rows = capsys.readouterr().out.splitlines()[1:]
        assert {r.split(",")[1] for r in rows} == {"1"}

    def test_certify_exact(self, tmp_path, capsys):
        p = tmp_path / "d0.json"
        main(["scheme", "build", "--preset", "dmera", "--T", "0", "--D", "1", "-o", str(p)])
        assert main(["mixing", "certify", "--scheme", str(p), "--observable", "Z@0", "--iter", "0", "--exact"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert float(doc["L"]) == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_sup_zero_samples(self, dmera_file, capsys):
        assert main(["mixing", "sup", "--scheme", str(dmera_file), "--iter", "1", "--samples", "0"]) == 0
        assert json.loads(capsys.readouterr().out)["delta_sup_lower"] == "0"

    def test_cap_exit_code(self, tmp_path, capsys):
        p = tmp_path / "r.json"
        main(["scheme", "build", "--preset", "ri", "--T", "3", "--D", "3", "--dim", "2", "--side", "4", "-o", str(p)])
        assert main(["mixing", "profile", "--scheme", str(p), "--observable", "ZZ@0,1"]) == 3
        assert "iteration" in capsys.readouterr().err

    def test_bad_observable(self, dmera_file):
        assert main(["mixing", "profile", "--scheme", str(dmera_file), "--observable", "ZQ@1,2"]) == 2
        assert main(["mixing", "profile", "--scheme", str(dmera_file), "--observable", "nope.json"]) == 2

    def test_transfer(self, tmp_path, capsys):
        p = tmp_path / "s.json"
        main(["scheme", "build", "--preset", "mps", "--T", "3", "--D", "1", "--gates", "swap", "-o", str(p)])
        assert main(["mixing", "transfer", "--scheme", str(p), "--n-max", "2", "--eps", "0.1"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mixing"] and doc["t1"] == 1
        # swap gates make the bath channel a reset: distances 2, 0, 0
        norms = [float(v) for v in doc["norms"]]
        assert len(norms) == len(doc["envelope"]) == 3
        assert norms[0] == pytest.approx(2, abs=1e-6)
        assert norms[1:] == pytest.approx([0, 0], abs=1e-9)


class TestBoundsCommand:
    def test_table1(self, capsys):
        assert main(["bounds", "table1", "--lam", "1", "--eps-U", str(math.exp(-3)), "--eps-P", "0", "--D", "2", "--T", "10"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[2].endswith(",12,6") and lines[1].endswith(",2048,1024")

    def test_lambda_must_be_positive(self):
        for cmd in ("table1", "dmera", "ri"):
            args = ["bounds", cmd, "--lam", "0", "--eps-U", "0.1", "--eps-P", "0.1", "--D", "1", "--T", "3"]
            assert main(args) == 2

    def test_stability_noiseless(self, tmp_path, capsys):
        p = tmp_path / "m.json"
        main(["scheme", "build", "--preset", "mps", "--T", "4", "--D", "1", "--seed", "2", "-o", str(p)])
        capsys.readouterr()
        assert main(["bounds", "stability", "--scheme", str(p), "--observable", "X@5", "--eps-U", "0", "--eps-P", "0"]) == 0
        for row in capsys.readouterr().out.splitlines()[1:]:
            t, delta, nu, nq, main_b, cor = row.split(",")
            assert float(main_b) == 2 * float(delta)

    def test_cutoff_clamped(self, capsys):
        assert main(["bounds", "cutoff", "--c", "1", "--gamma", "1", "--D", "1", "--eps", "1e-9", "--T", "3"]) == 0
        assert json.loads(capsys.readouterr().out)["t_0"] == "0"

    def test_dmera_and_ri_tables(self, capsys):
        assert main(["bounds", "dmera", "--T", "3", "--D", "1", "--lam", "1", "--eps-U", "0.01", "--eps-P", "0.01"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 5
        assert main(["bounds", "ri", "--d", "2", "--T", "3", "--D", "1", "--lam", "1", "--eps-U", "0.01", "--eps-P", "0.01"]) == 0


class TestVerifyCommand:
    def test_zero_trials(self, capsys):
        assert main(["verify", "--suite", "lemma", "--trials", "0"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True

    def test_pass(self, capsys):
        assert main(["verify", "--suite", "duality", "--trials", "3", "--seed", "1"]) == 0

    def test_failure_exit_code(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["verify", "--suite", "counts", "--trials", "2", "-o", str(out)]) == 1
        assert json.loads(out.read_text())["failures"] == 2
        assert manifest_of(out)["params"]["suite"] == "counts"

    def test_threads_flag(self, capsys):
        main(["--threads", "1", "verify", "--suite", "certify", "--trials", "4"])
        a = capsys.readouterr().out
        main(["--threads", "4", "verify", "--suite", "certify", "--trials", "4"])
        assert capsys.readouterr().out == a

    def test_bad_threads(self):
        assert main(["--threads", "0", "verify", "--suite", "lemma", "--trials", "0"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "conecraft", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "conecraft" in res.stdout
