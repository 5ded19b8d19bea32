import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from psasaki.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, main
from psasaki.config import ConfigError, load_config, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_verify_passes_and_writes_report(tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("verify", "--config", CONFIGS / "sphere3_verify.yaml", "--out", out, "--quiet") == EXIT_PASS
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["engine"]["name"] == "psasaki"
    assert all(r["passed"] for r in doc["records"])


def test_failed_run_still_writes_report(tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("verify", "--config", CONFIGS / "sphere3_sabotaged.yaml", "--out", out, "--quiet") == EXIT_FAIL
    doc = json.loads(out.read_text())
    failed = {r["id"]: r["residual"] for r in doc["records"] if not r["passed"]}
    assert failed["ambient.eta_xi"] == pytest.approx(0.5)


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = CONFIGS / "tanno_sphere3.yaml"
    for out in (a, b):
        run_cli("tanno", "--config", cfg, "--out", out, "--csv", tmp_path / "t", "--quiet")
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "t_alpha.csv").read_text().count("\n") == 5
    assert (tmp_path / "t_eigenvalues.csv").exists()


def test_seed_override_is_recorded(tmp_path):
    out = tmp_path / "r.json"
    run_cli("verify", "--config", CONFIGS / "sphere3_verify.yaml", "--out", out, "--seed", 99, "--quiet")
    assert json.loads(out.read_text())["seed"] == 99


def test_tolerance_scale(tmp_path):
    doc = {"ambient": {"model": "round-sphere", "n": 1}, "tolerances": {"identity": 1e-6}}
    cfg = validate(doc, command="verify", tolerance_scale=10.0)
    assert cfg.tol("identity") == pytest.approx(1e-5)
    assert cfg.tol("legendrian") == pytest.approx(1e-8)
    out = tmp_path / "r.json"
    p = write_config(tmp_path, doc)
    # an absurdly tight scale turns roundoff into failures
    assert run_cli("verify", "--config", p, "--out", out, "--tolerance-scale", 1e-12, "--quiet") == EXIT_FAIL


@pytest.mark.parametrize(
    "doc, command, path",
    [
        ({"ambient": {"model": "round-sphere"}, "alphas": [1, -2]}, "tanno", "alphas[1]"),
        ({"ambient": {"model": "round-sphere"}, "checks": {"legendrian": True}}, "verify", "checks.legendrian"),
        ({"ambient": {"model": "no-such-model"}}, "verify", "ambient.model"),
        ({"ambient": {"model": "round-sphere"}, "colour": 1}, "verify", "colour"),
        ({"ambient": {"model": "round-sphere"}}, "tanno", "alphas"),
        ({"ambient": {"model": "round-sphere"}, "immersion": "great-circle"}, "second-variation", "potentials"),
        ({"ambient": {"model": "round-sphere", "n": 2}, "immersion": "real-sphere"}, "spectrum", "immersion"),
        ({"ambient": {"model": "round-sphere"}, "immersion": "great-circle", "potentials": ["cos(w)"]},
         "second-variation", "potentials[0]"),
        ({"ambient": {"model": "round-sphere"}, "seed": -1}, "verify", "seed"),
    ],
)
def test_validation_errors_name_the_field(doc, command, path):
    with pytest.raises(ConfigError) as exc:
        validate(doc, command=command)
    assert exc.value.path == path
    assert str(exc.value).startswith(path)


def test_config_error_exit_code_and_report(tmp_path, capsys):
    p = write_config(tmp_path, {"ambient": {"model": "round-sphere"}, "alphas": [1, -2]})
    out = tmp_path / "r.json"
    assert run_cli("tanno", "--config", p, "--out", out) == EXIT_CONFIG
    assert "alphas[1]" in capsys.readouterr().err
    doc = json.loads(out.read_text())
    assert not doc["passed"] and doc["errors"][0]["path"] == "alphas[1]"
    assert run_cli("verify", "--config", tmp_path / "missing.yaml") == EXIT_CONFIG


def test_load_config_reads_yaml():
    cfg = load_config(CONFIGS / "great_circle_variation.yaml", command="second-variation")
    assert cfg.seed == 1 and len(cfg.potentials) == 3 and cfg.random_potentials == 10


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "psasaki", "spectrum", "--config", str(CONFIGS / "spectrum_clifford.yaml"),
         "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_PASS, proc.stderr
    assert proc.stdout.strip().splitlines()[-1].startswith("PASS")
    assert json.loads(out.read_text())["spectra"]
