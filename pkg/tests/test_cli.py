import json
import subprocess
import sys

import numpy as np
import pytest

from nhcontrol.cli import dispatch
from nhcontrol.device import GateProgram, RegisterState


def run_json(capsys, argv):
    code = dispatch(argv)
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


def test_check_default_params(capsys):
    d = run_json(capsys, ["check"])
    assert d["dim_reached"] == 64
    assert d["schema"] == "closure_report/1"
    assert d["manifest"]["command"] == "check"
    assert d["manifest"]["version"]


def test_check_params_file(tmp_path, capsys):
    p = tmp_path / "p.json"
    # a cell with no fields or Stark shifts keeps only the drift
    p.write_text(json.dumps({"V1": 0, "V2": 0, "V3": 0, "Delta1": 0, "Delta2": 0, "Delta3": 0}))
    d = run_json(capsys, ["check", "--params", str(p)])
    assert d["verdict"] == "not controllable"


def test_config_dir_env(tmp_path, capsys, monkeypatch):
    (tmp_path / "cell_params.json").write_text(json.dumps({"V1": 0, "V2": 0, "V3": 0}))
    monkeypatch.setenv("NHCONTROL_CONFIG_DIR", str(tmp_path))
    d = run_json(capsys, ["check"])
    assert d["dim_reached"] < 64


def test_run_empty_program(tmp_path, capsys):
    prog = tmp_path / "prog.json"
    prog.write_text(json.dumps(GateProgram(3).to_dict()))
    rng = np.random.default_rng(3)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = RegisterState(3, v / np.linalg.norm(v))
    sfile = tmp_path / "state.json"
    sfile.write_text(json.dumps(state.to_dict()))
    d = run_json(capsys, ["run", "--program", str(prog), "--state", str(sfile)])
    assert np.array_equal(RegisterState.from_dict(d).amplitudes, state.amplitudes)


def test_compile_then_run_qft(tmp_path, capsys):
    assert dispatch(["compile-qft", "--n", "3", "--out", str(tmp_path)]) == 0
    d = run_json(capsys, ["run", "--program", str(tmp_path / "qft_program.json"), "--basis", "0"])
    amps = RegisterState.from_dict(d).amplitudes
    assert np.allclose(amps, np.full(8, 1 / np.sqrt(8)))


def test_synth_identity_csv(capsys):
    assert dispatch(["synth-identity", "--format", "csv"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].startswith("k,perturbation,C_k") and len(rows) == 65


@pytest.mark.slow
def test_synth_gate_toffoli(tmp_path, capsys, base_seq):
    base = tmp_path / "base.json"
    base.write_text(base_seq.to_json())
    d = run_json(capsys, ["synth-gate", "--base", str(base), "--gate", '{"kind": "toffoli"}'])
    assert d["verification"]["phase_aligned_distance"] < 1e-8
    assert d["m"] <= 8
    assert d["gate"]["kind"] == "toffoli"


def test_lower_reports_intervals(tmp_path, capsys, base_seq):
    base = tmp_path / "base.json"
    base.write_text(base_seq.to_json())
    prog = GateProgram(3)
    prog.add_exchanges([(1, 2)])
    pfile = tmp_path / "prog.json"
    pfile.write_text(json.dumps(prog.to_dict()))
    d = run_json(capsys, ["lower", "--program", str(pfile), "--base", str(base)])
    assert d["total_intervals"] == 64 * d["steps"][0]["m"]


def test_emulate_csv(tmp_path, capsys):
    cfg = tmp_path / "lat.json"
    cfg.write_text(json.dumps({"rows": 1, "cols": 3, "steps": 2, "default": {"terms": {"XII": 1}}}))
    assert dispatch(["emulate", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("step,tau,")


def test_outputs_are_deterministic(tmp_path):
    for run in ("a", "b"):
        assert dispatch(["compile-qft", "--n", "9", "--out", str(tmp_path / run)]) == 0
    a = (tmp_path / "a" / "qft_program.json").read_bytes()
    b = (tmp_path / "b" / "qft_program.json").read_bytes()
    assert a == b


def test_timing_only_on_request(capsys):
    d = run_json(capsys, ["compile-qft", "--n", "3", "--timing"])
    assert "wall_clock_s" in d["manifest"]
    d = run_json(capsys, ["compile-qft", "--n", "3"])
    assert "wall_clock_s" not in d["manifest"]


def test_missing_file_is_domain_error(capsys):
    assert dispatch(["run", "--program", "/nonexistent/prog.json"]) == 1
    assert "not found" in capsys.readouterr().err


def test_malformed_json_is_domain_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert dispatch(["check", "--params", str(bad)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_bad_gate_spec(capsys):
    assert dispatch(["synth-gate", "--gate", '{"kind": "perm", "i": 1, "j": 1}']) == 1


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["check", "--seed", "x"]])
def test_usage_errors(argv, capsys):
    assert dispatch(argv) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nhcontrol", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "nhcontrol" in res.stdout
