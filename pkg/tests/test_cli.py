"""End-to-end checks of the command-line front end.

Most tests drive main(argv) in-process for speed; one goes through a real
subprocess to make sure the module entry point is wired up.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import pytest

from percoflow.cli import main
from percoflow.nu_estimator import NuTable

CONST = '{"kind":"constant","a":1}'
BERN = '{"kind":"bernoulli","p":0.6,"a":1}'


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _json(out: str) -> dict:
    return json.loads(out)


# ---------------------------------------------------------------------------
# happy paths


def test_flow_constant_square(capsys):
    code, out, err = _run(capsys, [
        "flow", "--domain", "unit-square", "--law", CONST,
        "--n", "8", "--seed", "1",
    ])
    assert code == 0
    j = _json(out)
    assert j["schema"] == "percoflow/1"
    assert j["phi_n"] == 9.0
    assert j["cut_size"] == 9
    assert j["cluster"]["matches_cutset"] is True
    # machine output is a single JSON line on stdout, chatter stays on stderr
    assert out.count("\n") == 1


def test_flow_writes_artifacts(capsys, tmp_path):
    code, out, _ = _run(capsys, [
        "flow", "--domain", "unit-square", "--law", BERN,
        "--n", "6", "--seed", "2", "--out", str(tmp_path),
    ])
    assert code == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"flow.json", "cut.csv", "manifest.json"}
    stdout = _json(out)
    on_disk = json.loads((tmp_path / "flow.json").read_text())
    stdout.pop("schema")
    assert on_disk == stdout
    cut_lines = (tmp_path / "cut.csv").read_text().splitlines()
    assert cut_lines[0] == "z0,z1,axis"
    assert len(cut_lines) - 1 == on_disk["cut_size"]


def test_selftest_passes(capsys):
    code, out, _ = _run(capsys, ["selftest", "--replicas", "25", "--seed", "3"])
    assert code == 0
    j = _json(out)
    assert j["passed"] is True
    assert j["instances"] > 0


def test_nu_single_direction_constant(capsys):
    code, out, _ = _run(capsys, [
        "nu", "--law", CONST, "--direction", "1,0",
        "--meshes", "2,4", "--replicas", "3",
    ])
    assert code == 0
    j = _json(out)
    assert j["directions"] == 1
    # constant(1): tau_n / n = (n+1)/n exactly, pooled at the finest mesh
    assert j["first"]["nu_hat"] == pytest.approx(1.25)
    assert j["nu_min"] == j["nu_max"] == pytest.approx(1.25)


def test_nu_table_feeds_phi_omega(capsys, tmp_path):
    nu_dir = tmp_path / "nu"
    code, _, _ = _run(capsys, [
        "nu", "--law", CONST, "--meshes", "2", "--replicas", "3",
        "--out", str(nu_dir),
    ])
    assert code == 0
    table_path = nu_dir / "nu_table.json"
    assert table_path.exists()
    assert NuTable.load(str(table_path)).entries  # artifact loads back

    phi_dir = tmp_path / "phi"
    code, out, _ = _run(capsys, [
        "phi-omega", "--domain", "unit-square",
        "--nu-table", str(table_path), "--out", str(phi_dir),
    ])
    assert code == 0
    j = _json(out)
    assert j["nu_table_ref"] == str(table_path)
    assert "trace" not in j  # stdout stays small
    on_disk = json.loads((phi_dir / "phi_omega.json").read_text())
    assert len(on_disk["trace"]) > 0  # the file keeps the full search record
    assert on_disk["phi_omega_hat"] == j["phi_omega_hat"]


def test_rate_artifacts_and_manifest(capsys, tmp_path):
    code, out, _ = _run(capsys, [
        "rate", "--domain", "unit-square", "--law", BERN,
        "--lambda", "0.3", "--meshes", "2,4", "--replicas", "20",
        "--seed", "5", "--workers", "1", "--out", str(tmp_path),
    ])
    assert code == 0
    assert _json(out)["lambda"] == 0.3
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"rate.csv", "rate.json", "manifest.json"}
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["schema"] == "percoflow/1"
    assert man["command"] == "rate"
    assert man["written"] == ["rate.csv", "rate.json"]
    assert man["config"]["lam"] == 0.3
    assert man["config"]["seed"] == 5
    # hash is over the sorted config echo, so it can be recomputed
    blob = json.dumps(man["config"], sort_keys=True)
    assert man["config_hash"] == hashlib.sha256(blob.encode()).hexdigest()
    head = (tmp_path / "rate.csv").read_text().splitlines()[0]
    assert head == "n,replicas,hits,p_hat,wilson_lo,wilson_hi,r_n"


def test_rate_rerun_and_workers_byte_identical(capsys, tmp_path):
    args = ["rate", "--domain", "unit-square", "--law", BERN,
            "--lambda", "0.3", "--meshes", "2,4", "--replicas", "20",
            "--seed", "5"]
    d1, d2, d3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert _run(capsys, args + ["--workers", "1", "--out", str(d1)])[0] == 0
    assert _run(capsys, args + ["--workers", "1", "--out", str(d2)])[0] == 0
    assert _run(capsys, args + ["--workers", "2", "--out", str(d3)])[0] == 0
    ref = (d1 / "rate.csv").read_bytes()
    assert (d2 / "rate.csv").read_bytes() == ref
    assert (d3 / "rate.csv").read_bytes() == ref
    assert (d2 / "rate.json").read_bytes() == (d1 / "rate.json").read_bytes()


def test_cutset_beta_grid_and_csv(capsys, tmp_path):
    code, out, _ = _run(capsys, [
        "cutset", "--domain", "unit-square", "--law", BERN,
        "--meshes", "2,4", "--replicas", "15", "--beta-grid", "1,2,3",
        "--seed", "1", "--workers", "1", "--out", str(tmp_path),
    ])
    assert code == 0
    j = _json(out)
    assert j["beta_grid"] == [1.0, 2.0, 3.0]
    lines = (tmp_path / "cutset.csv").read_text().splitlines()
    assert lines[0] == "n,beta,tail"
    assert len(lines) == 1 + 2 * 3


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "domain": "unit-square", "law": json.loads(BERN), "lam": 0.2,
        "meshes": "2,4", "replicas": 20, "workers": 1, "seed": 5,
    }))
    code, out, _ = _run(capsys, ["rate", "--config", str(cfg)])
    assert code == 0
    assert _json(out)["lambda"] == 0.2
    # a flag given on the command line wins over the file
    code, out, _ = _run(capsys, ["rate", "--config", str(cfg),
                                 "--lambda", "0.35"])
    assert code == 0
    assert _json(out)["lambda"] == 0.35


def test_no_temp_files_left_behind(capsys, tmp_path):
    _run(capsys, ["flow", "--domain", "unit-square", "--law", CONST,
                  "--n", "4", "--out", str(tmp_path)])
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


# ---------------------------------------------------------------------------
# failure modes and exit codes


def test_missing_n_exits_2(capsys):
    code, out, err = _run(capsys, [
        "flow", "--domain", "unit-square", "--law", CONST,
    ])
    assert code == 2
    assert out == ""
    assert "--n" in err


def test_bad_law_exits_2(capsys):
    code, _, err = _run(capsys, [
        "flow", "--domain", "unit-square", "--law", '{"kind":"nope"}',
        "--n", "4",
    ])
    assert code == 2
    assert "law" in err


def test_missing_domain_file_exits_2(capsys):
    code, _, err = _run(capsys, [
        "flow", "--domain", "no/such/file.json", "--law", CONST, "--n", "4",
    ])
    assert code == 2
    assert "domain" in err


def test_config_json_error_reports_line(capsys, tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{\n "domain": "unit-square",\n oops\n}\n')
    code, _, err = _run(capsys, ["rate", "--config", str(cfg)])
    assert code == 2
    assert "line 3" in err


def test_missing_config_file_exits_2(capsys):
    code, _, err = _run(capsys, ["rate", "--config", "missing.json"])
    assert code == 2
    assert "not found" in err


def test_workers_below_one_exits_2(capsys):
    code, _, err = _run(capsys, [
        "rate", "--domain", "unit-square", "--law", BERN, "--lambda", "0.3",
        "--meshes", "2", "--replicas", "5", "--workers", "0",
    ])
    assert code == 2
    assert "workers" in err


def test_unknown_command_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_runtime_failure_exits_1(capsys):
    # the law parses but the direction is degenerate, which only surfaces
    # once the estimator starts working: a runtime failure, not config
    code, out, err = _run(capsys, [
        "nu", "--law", BERN, "--direction", "0,0",
        "--meshes", "2", "--replicas", "3",
    ])
    assert code == 1
    assert "runtime failure" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


# ---------------------------------------------------------------------------
# real process


def test_module_entry_point_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "percoflow.cli", "flow",
         "--domain", "unit-square", "--law", CONST, "--n", "8", "--seed", "1"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    j = json.loads(proc.stdout)
    assert j["phi_n"] == 9.0
    assert j["cut_size"] == 9
