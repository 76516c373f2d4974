import csv
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from floquetex.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_stationary_mpa_cross_check(capsys):
    code, out, err = run(["stationary", "--family", "ssep", "--L", "3", "--kappa", "1/2",
                          "--method", "mpa", "--cross-check"], capsys)
    assert code == 0 and "cross-check passed" in err
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["configuration", "probability"] and len(rows) == 9
    assert sum(Fraction(p) for _, p in rows[1:]) == 1


def test_fused_eigensolve_rows(capsys, tmp_path):
    path = tmp_path / "s.csv"
    code, _, _ = run(["stationary", "--family", "fused-ssep", "--L", "3", "--method", "eigensolve",
                      "--out", str(path)], capsys)
    assert code == 0
    assert len(path.read_text().splitlines()) == 28


def test_open_chain_parity_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["stationary", "--L", "4"])
    assert exc.value.code == 2


def test_periodic_needs_particle_sector(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["stationary", "--L", "4", "--boundary", "periodic"])
    assert exc.value.code == 2
    code, out, _ = run(["stationary", "--L", "4", "--boundary", "periodic", "--particles", "2"], capsys)
    assert code == 0 and len(out.splitlines()) == 17


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "ssep", "L": 5, "kappa": "1/3"}))
    code, out, _ = run(["observables", "--config", str(cfg), "--kappa", "1/2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["L"] == 5 and doc["model"]["kappa"] == "1/2"


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"famly": "ssep"}))
    with pytest.raises(SystemExit) as exc:
        main(["observables", "--config", str(cfg)])
    assert exc.value.code == 2


def test_observables_reference(capsys, tmp_path):
    prof = tmp_path / "p.csv"
    code, out, _ = run(["observables", "--method", "closed", "--out", str(prof)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["J"] == "1/4" and doc["Z_L"] == "24"
    assert prof.read_text().splitlines()[1:] == ["1,3/4", "2,1/2", "3,1/4"]


def test_observables_asep_mpa(capsys):
    code, out, _ = run(["observables", "--family", "asep", "--t", "1/2", "--a", "3", "--b", "3",
                        "--c", "1/2", "--d", "1/5", "--method", "mpa"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["J"] == doc["J_formula"]


def test_build_markov_csv_and_json(capsys):
    code, out, _ = run(["build-markov", "--L", "3"], capsys)
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0][0] == "to\\from" and len(rows) == 9
    code, out, _ = run(["build-markov", "--L", "3", "--format", "json"], capsys)
    doc = json.loads(out)
    assert len(doc["matrix"]) == 8 and doc["labels"][0] == "000"


def test_build_markov_warns_on_invalid_parameters(capsys):
    code, _, err = run(["build-markov", "--family", "asep", "--t", "1/2", "--a", "1", "--c", "0",
                        "--b", "3", "--d", "1/5"], capsys)
    assert code == 0 and "warning" in err


def test_verify_small_and_corrupt(capsys, tmp_path):
    out = tmp_path / "v.jsonl"
    code, _, err = run(["verify", "--family", "ssep", "--points", "2", "--no-chains", "--out", str(out)], capsys)
    assert code == 0 and "0 failed" in err
    assert all(json.loads(line)["pass"] for line in out.read_text().splitlines())
    code, _, err = run(["verify", "--family", "ssep", "--points", "2", "--no-chains", "--corrupt",
                        "--out", str(out)], capsys)
    assert code == 1 and "FAIL" in err


def test_simulate_is_reproducible(capsys, tmp_path):
    argv = ["simulate", "--family", "asep", "--t", "1/2", "--a", "3", "--b", "3", "--c", "1/2",
            "--d", "1/5", "--L", "5", "--scalar", "float", "--periods", "500", "--replicas", "2",
            "--seed", "7"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    code1, out1, _ = run(argv + ["--out", str(a)], capsys)
    code2, out2, _ = run(argv + ["--out", str(b), "--threads", "2"], capsys)
    assert code1 == code2 == 0
    assert out1 == out2 and a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "site,density,stderr"


def test_runtime_error_exit_code(capsys):
    code, _, err = run(["simulate", "--family", "asep", "--t", "1/2", "--a", "1", "--c", "0",
                        "--b", "3", "--d", "1/5", "--scalar", "float", "--periods", "10"], capsys)
    assert code == 1 and "error" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "floquetex", "observables"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["J"] == "1/4"
