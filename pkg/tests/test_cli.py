import json

import numpy as np
import pytest

from tweediescore.cli import ENV_NODES, main, read_series


def _run(args, capsys=None):
    code = main([str(a) for a in args])
    return code


@pytest.fixture
def poisson_csv(tmp_path):
    path = tmp_path / "y.csv"
    assert main(["simulate", "--dgp", "nef-constant", "--family", "poisson", "--mu", "3",
                 "--length", "60", "--seed", "4", "--output", str(path)]) == 0
    return path


def test_filter_conjugate_header(poisson_csv, tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["filter", "--mode", "conjugate", "--family", "poisson", "--delta", "0.9",
                 "--input", str(poisson_csv), "--output", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,y,mu_pred,mu_filt,tau,n,score,innovation"
    assert len(lines) == 61


def test_filter_score_mode(poisson_csv, tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["filter", "--mode", "score", "--family", "poisson", "--omega", "0.3", "--beta", "0.9",
                 "--alpha", "0.1", "-i", str(poisson_csv), "-o", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:4] == ["t", "y", "theta", "mu"] and "loglik" in header


def test_verify_identities_report(tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify-identities", "--suite", "all", "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    assert isinstance(data, list) and data
    assert all(set(r) == {"identity_id", "lhs", "rhs", "abs_gap", "tolerance", "pass"} for r in data)
    assert all(r["pass"] for r in data)
    assert {r["identity_id"] for r in data} == {"GaussianTweedie", "NefNatural", "NefExpectation",
                                                 "ParameterSpaceTweedie"}


def test_verify_identities_fails_with_exit_one_when_check_fails(tmp_path, monkeypatch):
    from tweediescore import verification
    from tweediescore.identities import IdentityId, IdentityReport
    monkeypatch.setitem(verification.SUITES, "gaussian",
                        lambda cfg: [IdentityReport(IdentityId.GAUSSIAN_TWEEDIE, 0.0, 1.0, 1e-6)])
    out = tmp_path / "r.json"
    assert main(["verify-identities", "--suite", "gaussian", "-o", str(out)]) == 1
    assert json.loads(out.read_text())[0]["pass"] is False


def test_expansion_study_output(capsys):
    assert main(["expansion-study", "--family", "gamma", "--dispersion", "0.5", "--a", "1.0", "--y", "2.0",
                 "--pgrid", "1e-1,3e-2,1e-2,3e-3,1e-3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "P,error" and len(lines) == 7
    assert lines[-1].startswith("slope=")
    slope = float(lines[-1].split("=")[1])
    assert 1.8 <= slope <= 2.2


def test_simulate_columns(capsys):
    assert main(["simulate", "--dgp", "local-level", "--state-var", "0.1", "--obs-var", "1",
                 "--length", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,y,latent" and len(lines) == 4
    assert main(["simulate", "--dgp", "nef-constant", "--family", "gamma", "--mu", "2", "--length", "3"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "t,y"


def test_fit_json(tmp_path):
    data = tmp_path / "g.csv"
    assert main(["simulate", "--dgp", "garch11", "--omega-g", "0.1", "--alpha-g", "0.05", "--beta-g", "0.9",
                 "--length", "300", "--seed", "1", "-o", str(data)]) == 0
    out = tmp_path / "fit.json"
    assert main(["fit", "--family", "gaussian_variance", "-i", str(data), "-o", str(out), "--restarts", "1"]) == 0
    res = json.loads(out.read_text())
    assert {"omega", "beta", "alpha", "loglik", "converged", "garch"} <= set(res)


def test_round_trip_simulate_then_filter(tmp_path):
    data = tmp_path / "sim.csv"
    assert main(["simulate", "--dgp", "nef-random-walk", "--family", "gamma", "--dispersion", "0.5",
                 "--step-sd", "0.05", "--length", "50", "-o", str(data)]) == 0
    assert main(["filter", "--mode", "conjugate", "--family", "gamma", "--dispersion", "0.5",
                 "-i", str(data), "-o", str(tmp_path / "t.csv")]) == 0


def test_exit_codes(tmp_path, capsys):
    assert main(["filter", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["nonsense"]) == 1
    assert main(["filter", "--mode", "conjugate", "--family", "poisson", "-i", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y\n1,2\n2,oops\n")
    assert main(["filter", "--mode", "conjugate", "--family", "poisson", "-i", str(bad)]) == 1
    assert "non-numeric" in capsys.readouterr().err
    noy = tmp_path / "noy.csv"
    noy.write_text("t,x\n1,2\n")
    assert main(["filter", "--mode", "conjugate", "--family", "poisson", "-i", str(noy)]) == 1
    assert main(["simulate", "--dgp", "nef-constant", "--family", "poisson", "--mu", "0", "--length", "5"]) == 1
    assert main(["filter", "--mode", "conjugate", "--family", "poisson"]) == 1
    assert main(["simulate", "--dgp", "garch11", "--omega-g", "0.1", "--alpha-g", "0.05", "--beta-g", "0.9",
                 "--length", "5", "-o", str(tmp_path / "no_dir" / "x.csv")]) == 2


def test_config_precedence(tmp_path, poisson_csv, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "poisson", "delta": 0.5, "mode": "conjugate"}))
    assert main(["filter", "--config", str(cfg), "-i", str(poisson_csv)]) == 0
    from_config = capsys.readouterr().out
    assert main(["filter", "--config", str(cfg), "--delta", "0.9", "-i", str(poisson_csv)]) == 0
    from_flag = capsys.readouterr().out
    assert main(["filter", "--mode", "conjugate", "--family", "poisson", "-i", str(poisson_csv)]) == 0
    default = capsys.readouterr().out
    assert from_flag == default != from_config
    # n at the fixed point: 1 for delta = 0.5, so filtered n = 2
    assert from_config.splitlines()[1].split(",")[5] == "2.0"
    cfg.write_text(json.dumps({"unknown_key": 1}))
    assert main(["filter", "--config", str(cfg), "-i", str(poisson_csv)]) == 1


def test_env_node_override(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_NODES, "8")
    assert main(["verify-identities", "--suite", "gaussian", "-o", str(tmp_path / "r.json")]) == 1
    monkeypatch.setenv(ENV_NODES, "256")
    assert main(["verify-identities", "--suite", "gaussian", "-o", str(tmp_path / "r.json")]) == 0
    monkeypatch.setenv(ENV_NODES, "many")
    assert main(["verify-identities", "--suite", "gaussian", "-o", str(tmp_path / "r.json")]) == 1


def test_read_series_accepts_optional_t(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("y\n1.5\n2\n")
    np.testing.assert_array_equal(read_series(p), [1.5, 2.0])
