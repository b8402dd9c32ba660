"""Experiment drivers, report export, and the command-line interface."""

import csv
import io
import json

import pytest

from sgnls import cli
from sgnls.errors import ConfigError
from sgnls.experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_derivative_check,
    run_illposedness,
    run_sobolev_saturation,
    run_strichartz,
)
from sgnls.geometry import D_S


def _cfg(**kw):
    base = dict(level=4, jmax=4)
    base.update(kw)
    return ExperimentConfig(**base)


# ------------------------------------------------------------- configuration

@pytest.mark.parametrize("kw", [
    dict(bc="periodic"),
    dict(s_values=(2.5,)),
    dict(s_values=(-0.1,)),
    dict(jmin=1),
    dict(jmin=5, jmax=4),
    dict(jmax=7, level=6),
    dict(T=0.0),
    dict(dt=-1e-3),
    dict(output_format="xml"),
    dict(tolerance_profile="lenient"),
])
def test_config_rejected(kw):
    base = dict(level=6, jmax=6)
    base.update(kw)
    with pytest.raises(ConfigError):
        ExperimentConfig(**base)


def test_config_defaults_and_echo():
    cfg = ExperimentConfig()
    assert cfg.level == 6 and cfg.jmax == 6
    p = cfg.params()
    for key in ("level", "bc", "k", "s", "q", "jmin", "jmax", "T", "dt"):
        assert key in p
    assert cfg.thresholds["saturation_spread"] == 4.0
    strict = ExperimentConfig(tolerance_profile="strict")
    assert strict.thresholds["saturation_spread"] == 2.0


# ------------------------------------------------------------------- reports

def _toy_report():
    return ExperimentReport(
        name="toy", params={"level": 2, "q": [4]},
        columns=("a", "b"), rows=[(1, 2.5), (3, 4.5)],
        verdicts={"ok": True, "bad": False}, cache_fingerprint="cafe",
    )


def test_report_csv_layout():
    text = _toy_report().to_csv_text()
    lines = text.splitlines()
    assert lines[0].startswith("# experiment=toy")
    assert any(line.startswith("# param level=2") for line in lines)
    data = [row for row in csv.reader(io.StringIO(text))
            if row and not row[0].startswith("#")]
    assert data[0] == ["a", "b"]
    assert data[1] == ["1", "2.5"]
    assert ["verdict", "bad", "FAIL"] in data
    assert ["verdict", "ok", "PASS"] in data


def test_report_json_layout():
    payload = json.loads(_toy_report().to_json_text())
    assert payload["experiment"] == "toy"
    assert payload["columns"] == ["a", "b"]
    assert payload["rows"] == [[1, 2.5], [3, 4.5]]
    assert payload["verdicts"] == {"bad": False, "ok": True}
    assert payload["cache_fingerprint"] == "cafe"


def test_report_passed_property():
    rep = _toy_report()
    assert not rep.passed
    rep.verdicts["bad"] = True
    assert rep.passed


def test_report_write(tmp_path):
    rep = _toy_report()
    rep.write(tmp_path / "r.csv", "csv")
    rep.write(tmp_path / "r.json", "json")
    assert (tmp_path / "r.csv").read_text() == rep.to_csv_text()
    assert json.loads((tmp_path / "r.json").read_text())["experiment"] == "toy"


# --------------------------------------------------------------- experiments

def test_sobolev_saturation_structure():
    cfg = _cfg(q_values=(4, 6))
    rep = run_sobolev_saturation(cfg)
    assert len(rep.rows) == 2 * 3  # two exponents, j = 2..4
    for row in rep.rows:
        assert row[0] == 4 and row[2] in (4, 6) and row[3] in (2, 3, 4)
    assert set(rep.verdicts) == {"spread_q4", "spread_q6"}
    assert rep.cache_fingerprint


def test_sobolev_saturation_deterministic():
    cfg = _cfg()
    a = run_sobolev_saturation(cfg).to_csv_text()
    b = run_sobolev_saturation(cfg).to_csv_text()
    assert a == b


def test_illposedness_structure():
    cfg = _cfg(s_values=(0.3,), k=1)
    rep = run_illposedness(cfg)
    slope_rows = [r for r in rep.rows if r[4] == "slope"]
    assert len(slope_rows) == 1
    target = slope_rows[0][5]
    assert target == pytest.approx(D_S / 2 - 0.3, rel=1e-12)
    assert "slope_s0.3" in rep.verdicts
    assert any(key.startswith("ladder_") for key in rep.verdicts)


def test_illposedness_requires_subcritical_s():
    with pytest.raises(ConfigError):
        run_illposedness(_cfg(s_values=(1.5,)))


def test_strichartz_structure():
    rep = run_strichartz(_cfg(T=0.5))
    assert rep.verdicts["identity"]
    # the member born at the basis level is reported but not judged
    assert rep.params["resolved_j"] == [2, 3]
    assert len(rep.rows) == 3


def test_derivative_check_k1_passes():
    rep = run_derivative_check(_cfg(T=1.0, dt=1e-3))
    assert rep.verdicts == {"m1_richardson": True, "m2_noise_floor": True,
                            "m3_match": True}


def test_derivative_check_k2_resonant_bound():
    rep = run_derivative_check(_cfg(k=2, T=1.0, dt=1e-3))
    assert rep.verdicts == {"resonant_lower_bound": True}


# ---------------------------------------------------------------------- CLI

def test_cli_basis_and_cache(tmp_path, capsys):
    rc = cli.main(["basis", "--level", "2", "--cache", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "size=12" in out
    assert (tmp_path / "basis_M2_dirichlet.txt").exists()


def test_cli_spectrum_to_file(tmp_path, capsys):
    out_file = tmp_path / "spec.csv"
    rc = cli.main(["spectrum", "--level", "2", "--out", str(out_file)])
    assert rc == 0
    rows = [r for r in csv.reader(out_file.open())
            if r and not r[0].startswith("#")]
    assert rows[0] == ["index", "lambda", "birth_level", "localized_j"]
    assert len(rows) == 1 + 12


def test_cli_localized(capsys):
    rc = cli.main(["localized", "--level", "4"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "eigenvalue_ratio_5: PASS" in out
    assert "support_bounds: PASS" in out


def test_cli_sobolev_pass_and_report(tmp_path, capsys):
    out_file = tmp_path / "sob.json"
    rc = cli.main(["sobolev", "--level", "4", "--jmax", "4",
                   "--out", str(out_file), "--format", "json"])
    assert rc == 0
    payload = json.loads(out_file.read_text())
    assert payload["experiment"] == "sobolev_saturation"
    assert "PASS" in capsys.readouterr().out


def test_cli_reports_deterministic(tmp_path):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (f1, f2):
        assert cli.main(["sobolev", "--level", "4", "--jmax", "4",
                         "--out", str(f)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_cli_illposed_reports_ladder_failure(capsys):
    # at level 4 the growth ratios stay far below the highest witness
    # threshold, so the subcommand reports the red verdict via exit code 1
    rc = cli.main(["illposed", "--level", "4", "--jmax", "4", "--s", "0.3"])
    assert rc == 1
    out = capsys.readouterr().out
    assert "ladder_1000_s0.3: FAIL" in out


def test_cli_derivcheck_default_level(capsys):
    rc = cli.main(["derivcheck"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "m3_match: PASS" in out


def test_cli_nls(capsys):
    rc = cli.main(["nls", "--level", "3", "--T", "0.2"])
    assert rc == 0
    assert "mass drift" in capsys.readouterr().out


def test_cli_config_error_exit_code(capsys):
    rc = cli.main(["sobolev", "--level", "4", "--jmax", "6"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_cli_env_cache_override(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    flag_dir = tmp_path / "flag"
    monkeypatch.setenv("SGNLS_CACHE", str(env_dir))
    rc = cli.main(["basis", "--level", "2", "--cache", str(flag_dir)])
    assert rc == 0
    assert (env_dir / "basis_M2_dirichlet.txt").exists()
    assert not flag_dir.exists()


def test_cli_threads_flag(capsys):
    rc = cli.main(["basis", "--level", "2", "--threads", "2"])
    assert rc == 0


def test_cli_strict_profile(capsys):
    rc = cli.main(["strichartz", "--level", "4", "--jmax", "4",
                   "--tolerance-profile", "strict"])
    assert rc in (0, 1)
    assert "identity" in capsys.readouterr().out
