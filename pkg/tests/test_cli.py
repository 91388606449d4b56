import json

import numpy as np
import pytest

from onebit import cli
from onebit.polytope import chsh_functional, table2_point


@pytest.fixture(autouse=True)
def _outdir(monkeypatch, tmp_path):
    monkeypatch.setenv("ONEBIT_OUTPUT_DIR", str(tmp_path / "runs"))
    return tmp_path


def run(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_enumerate_prints_count(capsys):
    code, out, _ = run(capsys, "enumerate", "--scenario", "2,2,2,2", "--set", "comm")
    assert code == cli.EXIT_OK
    assert out.splitlines()[0] == "64"
    assert "32 (differs)" in out


def test_enumerate_local_and_export(capsys, tmp_path):
    path = tmp_path / "v.jsonl"
    code, out, _ = run(capsys, "enumerate", "--scenario", "2,2,2,2", "--set", "local", "--output", str(path))
    assert code == 0 and out.strip() == "16"
    assert len(path.read_text().splitlines()) == 16


def test_guard_exit_code(capsys):
    code, _, err = run(capsys, "enumerate", "--scenario", "9,2,2,2")
    assert code == cli.EXIT_GUARD
    assert "guard" in err


def test_invalid_config_exit_codes(capsys):
    assert run(capsys, "enumerate", "--scenario", "2,2,2")[0] == cli.EXIT_CONFIG
    assert run(capsys, "simulate", "--theta", "2pi")[0] == cli.EXIT_CONFIG
    assert run(capsys, "simulate", "--n", "0")[0] == cli.EXIT_CONFIG
    assert run(capsys, "simulate", "--a", "0,0,1")[0] == cli.EXIT_CONFIG
    assert run(capsys, "bogus")[0] == cli.EXIT_CONFIG
    assert run(capsys, "membership", "--point", "missing.json")[0] == cli.EXIT_CONFIG
    assert run(capsys, "simulate", "--protocol", "semianalytical", "--theta", "0.3")[0] == cli.EXIT_CONFIG


def test_nonconvergence_exit_code(capsys, monkeypatch):
    from onebit import polytope

    def boom(*a, **k):
        raise polytope.NonConvergenceError("stalled")

    monkeypatch.setattr(polytope, "membership", boom)
    code, _, err = run(capsys, "membership", "--scenario", "2,2,2,2", "--point", "builtin:white")
    assert code == cli.EXIT_CONVERGENCE
    assert "stalled" in err


def test_simulate_smoke(capsys, tmp_path):
    out_file = tmp_path / "sim.json"
    code, out, _ = run(
        capsys, "simulate", "--protocol", "max-entangled", "--theta", "0.7854",
        "--n", "1000000", "--seed", "7", "--output", str(out_file),
    )
    assert code == 0
    data = json.loads(out_file.read_text())
    assert data["config"]["seed"] == 7
    row = data["settings"][0]
    assert abs(row["correlator_model"] - row["correlator_quantum"]) < 0.01
    assert np.allclose(row["model_table"], row["born_table"], atol=0.01)
    assert "run directory" in out


def test_simulate_fixed_setting(capsys, tmp_path):
    out_file = tmp_path / "sim.json"
    code, _, _ = run(
        capsys, "simulate", "--protocol", "semianalytical", "--theta", "5pi/32",
        "--a", "0,0,1", "--b", "1,0,0", "--n", "2000", "--output", str(out_file),
    )
    assert code == 0
    data = json.loads(out_file.read_text())
    assert data["coefficients"]["name"] == "5pi/32"
    assert data["settings"][0]["a_hat"] == [0.0, 0.0, 1.0]


def test_outputs_byte_identical(capsys, tmp_path):
    args = ["haar-scan", "--scenario", "3,3,3,3", "--points", "4", "--seed", "5", "--outdir", str(tmp_path / "o")]
    assert run(capsys, *args)[0] == 0
    assert run(capsys, *args, "--workers", "2")[0] == 0
    runs = sorted((tmp_path / "o").iterdir())
    assert len(runs) == 2
    for name in ("report.json", "points.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    report = json.loads((runs[0] / "report.json").read_text())
    assert report["config"]["seed"] == 5 and report["config"]["scenario"] == "3,3,3,3"
    assert report["result"]["seed"] == 5


def test_default_outdir_from_env(capsys, _outdir):
    code, _, _ = run(capsys, "theta-sweep", "--thetas", "5pi/32", "--settings", "3", "--n", "500")
    assert code == 0
    runs = list((_outdir / "runs").iterdir())
    assert len(runs) == 1 and runs[0].name.startswith("theta-sweep-seed0-")
    csv_text = (runs[0] / "settings_5pi_32.csv").read_text()
    assert csv_text.startswith("# config=")
    assert json.loads(csv_text.splitlines()[0][len("# config="):])["theta_name"] == "5pi/32"


def test_distance_between_files(capsys, tmp_path):
    p = tmp_path / "p.json"
    q = tmp_path / "q.json"
    p.write_text(json.dumps({"scenario": [1, 1, 2, 2], "table": [0.7, 0.0, 0.0, 0.3]}))
    q.write_text(json.dumps({"scenario": [1, 1, 2, 2], "table": [0.5, 0.0, 0.0, 0.5]}))
    out_file = tmp_path / "d.json"
    code, out, _ = run(capsys, "distance", "--target", str(p), "--model", str(q), "--output", str(out_file))
    assert code == 0
    block = json.loads(out_file.read_text())["blocks"][0]
    assert block["kl"] == pytest.approx(0.08228, abs=5e-6)
    assert block["tvd"] == pytest.approx(0.2)


def test_distance_sweep(capsys):
    code, out, _ = run(capsys, "distance", "--settings", "3", "--n", "1000")
    assert code == 0 and "median kl" in out


def test_visibility_table2(capsys, tmp_path):
    out_file = tmp_path / "vis.json"
    code, out, _ = run(
        capsys, "visibility", "--scenario", "4,2,4,4", "--point", "builtin:table2",
        "--noise", "white", "--output", str(out_file),
    )
    assert code == 0
    assert "noise threshold w_C=0.3333" in out
    result = json.loads(out_file.read_text())["result"]
    assert abs(result["w_c"] - 1 / 3) <= 5e-4


def test_visibility_reference_sidecar(capsys, tmp_path):
    side = tmp_path / "wq.json"
    side.write_text(json.dumps({"4,2,4,4": 1 / 3}))
    code, out, _ = run(
        capsys, "visibility", "--scenario", "4,2,4,4", "--point", "builtin:table2",
        "--method", "direct", "--reference-wq", str(side),
    )
    assert code == 0
    assert "external reference" in out and "no violation" in out
    bad = tmp_path / "other.json"
    bad.write_text(json.dumps({"3,3,3,3": 0.4}))
    code, _, _ = run(capsys, "visibility", "--scenario", "4,2,4,4", "--point", "builtin:table2", "--reference-wq", str(bad))
    assert code == cli.EXIT_CONFIG


def test_membership_point_file(capsys, tmp_path):
    path = tmp_path / "pt.json"
    path.write_text(table2_point().to_json())
    out_file = tmp_path / "m.json"
    code, out, _ = run(capsys, "membership", "--point", str(path), "--output", str(out_file))
    assert code == 0 and "inside=False" in out
    cert = json.loads(out_file.read_text())["result"]["certificate"]
    assert cert["kind"] == "separating-functional" and cert["margin"] > 0


def test_bell_value(capsys, tmp_path):
    assert run(capsys, "bell-value", "--functional", "builtin:table2", "--game")[1].strip() == "0.75"
    assert run(capsys, "bell-value", "--functional", "builtin:chsh", "--set", "local")[1].strip() == "2"
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"scenario": [2, 2, 2, 2], "table": chsh_functional().ravel().tolist()}))
    assert run(capsys, "bell-value", "--functional", str(path))[1].strip() == "4"


def test_version(capsys):
    assert cli.run(["--version"]) == 0
    assert "onebit" in capsys.readouterr().out
