import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from accelsynth import lmi
from accelsynth.analysis import AlgorithmRealization
from accelsynth.cli import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK, main


def call(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_rate():
    code, text = call("rate", "--m", "1", "--L", "100", "--ell", "1")
    assert code == EXIT_OK
    assert float(text) == pytest.approx(0.9)
    assert float(call("rate", "--m", "1", "--L", "100", "--ell", "0")[1]) == pytest.approx(99 / 101)


def test_analyze_bisect():
    code, text = call("analyze", "--alg", "gradient_descent", "--alpha", str(2 / 5), "--m", "1", "--L", "4",
                      "--ell", "0", "--bisect")
    assert code == EXIT_OK
    data = json.loads(text)
    assert data["rho_star"] == pytest.approx(0.6, abs=2e-4)
    AlgorithmRealization.from_dict(data["algorithm"])


def test_analyze_fixed_rate_and_infeasible():
    code, text = call("analyze", "--alg", "triple_momentum", "--m", "1", "--L", "100", "--rho", "0.901")
    assert code == EXIT_OK and json.loads(text)["status"] == "feasible"
    code, _ = call("analyze", "--alg", "gradient_descent", "--alpha", "0.4", "--m", "1", "--L", "4",
                   "--ell", "0", "--rho", "0.55")
    assert code == EXIT_INFEASIBLE


def test_bad_inputs():
    assert call("analyze", "--alg", "{not json", "--rho", "0.9")[0] == EXIT_ERROR
    assert call("nonsense")[0] == EXIT_ERROR
    assert call("rate", "--m", "1")[0] == EXIT_ERROR
    assert call("extremum", "--plant", "named:unknown:1")[0] == EXIT_ERROR
    assert call("rate", "--m", "2", "--L", "1")[0] == EXIT_ERROR


def test_synthesize_round_trip(tmp_path):
    code, text = call("synthesize", "--m", "1", "--L", "4", "--rho", "0.6", "--ell", "1")
    assert code == EXIT_OK
    path = tmp_path / "alg.json"
    path.write_text(text)
    code, text = call("analyze", "--alg", f"@{path}", "--m", "1", "--L", "4", "--rho", "0.6", "--ell", "1")
    assert code == EXIT_OK
    assert json.loads(text)["status"] == "feasible"


def test_synthesize_infeasible():
    code, text = call("synthesize", "--m", "1", "--L", "100", "--rho", "0.89", "--ell", "2")
    assert code == EXIT_INFEASIBLE
    assert json.loads(text)["feasible"] is False


def test_extremum_command():
    code, text = call("extremum", "--plant", "named:delay:1", "--L", "10", "--rho", "0.85", "--controller")
    assert code == EXIT_OK
    data = json.loads(text)
    assert data["certificate"]["status"] == "feasible"
    assert data["controller"]["K2"] is None
    code, _ = call("extremum", "--plant", "named:pole_family:2", "--L", "10", "--rho", "0.95")
    assert code == EXIT_INFEASIBLE


def test_extremum_plant_json():
    plant = {"g1": {"a": [[0.0]], "b": [[1.0]], "c": [[1.0]], "d": [[0.0]]}}
    code, text = call("extremum", "--plant", json.dumps(plant), "--L", "10", "--rho", "0.85")
    assert code == EXIT_OK


def test_sweep_rows():
    code, text = call("sweep", "--example", "delay", "--nu", "0,1,2", "--kappa", "10,100", "--ell", "1",
                      "--tol", "5e-3")
    assert code == EXIT_OK
    lines = text.strip().splitlines()
    assert lines[0] == "example,param,kappa,ell,rho_star,status,margin"
    assert len(lines) == 7
    code, text = call("sweep", "--example", "delay", "--nu", "0", "--kappa", "10", "--format", "json",
                      "--tol", "1e-2")
    assert json.loads(text)[0]["example"] == "delay"


def test_simulate_deterministic():
    args = ("simulate", "--alg", "triple_momentum", "--kappa", "10", "--seeds", "5", "--seed", "3", "--horizon", "200")
    code, a = call(*args)
    assert code == EXIT_OK
    assert a == call(*args)[1]
    data = json.loads(a)
    assert data["runs"] == 5 and data["kind"] == "empirical lower-bound witness"
    assert data["rho_hat_max"] <= 1 - 1 / np.sqrt(10) + 1e-2


@pytest.mark.parametrize("kind", ["analysis", "synthesis", "pick", "extremum"])
def test_dump_lmi_reloads(kind):
    code, text = call("dump-lmi", "--kind", kind, "--alg", "triple_momentum", "--m", "1", "--L", "10",
                      "--rho", "0.8", "--ell", "1")
    assert code == EXIT_OK
    prob = lmi.load_problem(text)
    assert lmi.solve(prob).feasible


def test_config_file_and_env(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iter": 1}))
    # one IPM iteration cannot certify anything
    code, _ = call("--config", str(cfg), "analyze", "--alg", "triple_momentum", "--m", "1", "--L", "10",
                   "--rho", "0.8")
    assert code == EXIT_INFEASIBLE
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert call("--config", str(bad), "rate", "--m", "1", "--L", "4")[0] == EXIT_ERROR
    env = dict(os.environ, ACCELSYNTH_CONFIG=str(cfg))
    proc = subprocess.run([sys.executable, "-m", "accelsynth.cli", "analyze", "--alg", "triple_momentum",
                           "--m", "1", "--L", "10", "--rho", "0.8"], env=env, capture_output=True, text=True)
    assert proc.returncode == EXIT_INFEASIBLE
