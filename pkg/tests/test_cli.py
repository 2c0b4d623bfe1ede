import json
import os
import subprocess
import sys

import pytest

from glvortex import cli


def _run(args, **kw):
    return subprocess.run([sys.executable, "-m", "glvortex", *args], capture_output=True, text=True, **kw)


def test_minimal_profile_config():
    cfg = cli.parse_config("[profile]\nR = 1\n", "profile")
    assert cfg.params["R"] == (1.0,) and cfg.params["n"] == 400


def test_beta_zero_rejected_with_line():
    with pytest.raises(cli.ConfigError) as e:
        cli.parse_config("[spectrum]\nlambda = 3\n\nbeta = 0\n", "spectrum", source="c.ini")
    assert e.value.errors == ["c.ini:4: beta: β>0 required"]


def test_unknown_key_and_missing_field():
    with pytest.raises(cli.ConfigError) as e:
        cli.parse_config("[dirichlet]\nbeta = 1\ncolour = red\n", "dirichlet", source="c.ini")
    msgs = "\n".join(e.value.errors)
    assert "c.ini:3: unknown key 'colour'" in msgs
    assert "missing required key 'epsilon'" in msgs


def test_range_and_format_errors():
    text = "[dirichlet]\nbeta = 1\nepsilon = 1.5\nn_theta = 31\ndegrees = 1,1; 0,0\n"
    with pytest.raises(cli.ConfigError) as e:
        cli.parse_config(text, "dirichlet", source="c")
    msgs = "\n".join(e.value.errors)
    assert "c:3: epsilon" in msgs and "c:4: n_theta" in msgs and "c:5: degrees" in msgs


def test_lambda_beta_above_one_accepted():
    cfg = cli.parse_config("[lambda_beta]\nbeta = 1.5\n", "lambda_beta")
    assert cfg.params["beta"] == (1.5,)


def test_plan_is_sorted_by_key():
    cfg = cli.parse_config("[dirichlet]\nbeta = 2, 0.5\nepsilon = 0.1, 0.3\ndegrees = 1,1; 1,0\n", "dirichlet")
    keys = [k for k, _ in cli.plan_jobs(cfg)]
    assert keys == sorted(keys, key=cli._sort_key)
    assert keys[0] == (0.5, (1, 0), 0.1)


def test_exit_code_config_error(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[qbreve]\nbeta = -1\n")
    r = _run(["qbreve", "--config", str(p), "--out", str(tmp_path / "o")])
    assert r.returncode == 2
    assert "β>0 required" in r.stderr
    r = _run(["qbreve", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")])
    assert r.returncode == 2


def test_exit_code_numerical_failure(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[lambda_beta]\nbeta = 1.5\nlevels = 100, 200\n")
    r = _run(["lambda-beta", "--config", str(p), "--out", str(tmp_path / "o")])
    assert r.returncode == 3
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["jobs"][0]["status"] == "failed" and "no crossing" in man["jobs"][0]["error"]


SWEEP_CFG = "[spectrum]\nbeta = 0.5, 1.0\nR = 2, 4.5\nmodes = 0, 1\nn = 200\n"


def test_parallel_equals_serial(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(SWEEP_CFG)
    for jobs, d in ((1, "s"), (3, "p")):
        assert _run(["spectrum", "--config", str(p), "--out", str(tmp_path / d), "--jobs", str(jobs)]).returncode == 0
    a = (tmp_path / "s" / "spectrum.csv").read_bytes()
    b = (tmp_path / "p" / "spectrum.csv").read_bytes()
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0] == "beta,lambda,R,mode,index,mu,residual" and len(lines) == 9
    assert cli.verify_digests(str(tmp_path / "p")) == []


def test_manifest_contents(tmp_path):
    cfg = cli.parse_config(SWEEP_CFG, "spectrum")
    man = cli.run(cfg, str(tmp_path), jobs=1)
    d = json.loads((tmp_path / "manifest.json").read_text())
    assert d["config"]["kind"] == "spectrum" and d["version"] == man.version
    assert set(d["files"]) == {"spectrum.csv"}
    assert all(j["seconds"] >= 0 and j["status"] == "ok" for j in d["jobs"])
    (tmp_path / "spectrum.csv").write_text("tampered\n")
    assert cli.verify_digests(str(tmp_path)) == ["spectrum.csv"]


def test_profile_and_qbreve_outputs(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[profile]\nR = 1, 2\nn = 40\n\n[qbreve]\nbeta = 0.5, 1.5\nn = 4000\n")
    assert _run(["profile", "--config", str(p), "--out", str(tmp_path)]).returncode == 0
    assert _run(["qbreve", "--config", str(p), "--out", str(tmp_path)]).returncode == 0
    names = sorted(os.listdir(tmp_path))
    assert "profile_R1.csv" in names and "profile_R2.csv" in names
    rows = (tmp_path / "qbreve.csv").read_text().splitlines()
    assert rows[0] == "beta,r_max,direct,closed_form" and len(rows) == 3


def test_dirichlet_and_core_energy(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[dirichlet]\nbeta = 2\nepsilon = 0.3\ndegrees = 1,1\nn_r = 16\nn_theta = 16\nsnapshot = yes\n\n"
                 "[core_energy]\nbeta = 2\nepsilon = 0.4, 0.35, 0.3\nn_r = 24\nn_theta = 24\n")
    assert _run(["dirichlet", "--config", str(p), "--out", str(tmp_path / "d"), "--jobs", "2"]).returncode == 0
    names = os.listdir(tmp_path / "d")
    assert any(n.endswith(".gp") for n in names) and "dirichlet.csv" in names
    assert _run(["core-energy", "--config", str(p), "--out", str(tmp_path / "c"), "--jobs", "2"]).returncode == 0
    rows = (tmp_path / "c" / "core_energy.csv").read_text().splitlines()
    assert rows[0].startswith("label,beta,Q")
    q = {r.split(",")[0]: float(r.split(",")[2]) for r in rows[1:]}
    # degree (1,1) at beta > 1 is symmetric, so its core energy is the single-component one
    assert q["11"] == pytest.approx(q["GL"], rel=1e-6)


def test_verify_subset(tmp_path):
    r = _run(["verify", "--criteria", "6", "--out", str(tmp_path)])
    assert r.returncode == 0
    assert r.stdout.startswith("[PASS] criterion 6")
    assert (tmp_path / "acceptance.txt").exists()
    assert _run(["verify", "--criteria", "42"]).returncode == 2
