import json

import pytest

from arw import cli, gridio
from arw.config import canonicalize, from_ini
from arw.errors import ConfigParseError, ValidationError

MINIMAL_CONFIG = """
[experiment]
d = 2
policy = explicit
n_values = 25
trials = 2
m_policy = per_L:16
master_seed = 11

[output]
csv = {csv}
report = {report}
"""


def run_cli(*argv):
    return cli.main(list(argv))


def test_lattice_command(capsys, tmp_path):
    report = tmp_path / "lat.json"
    assert run_cli("lattice", "--dim", "2", "--n", "25", "--points", "--report", str(report)) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dim_HL"] == 12
    assert payload["orthogonality"] == [[150, 0], [0, 150]]
    assert len(payload["points"]) == 12
    assert json.loads(report.read_text()) == payload


def test_lattice_command_empty_shell(capsys):
    assert run_cli("lattice", "--dim", "3", "--n", "7") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dim_HL"] == 0
    assert payload["orthogonality"] is None


def test_sample_and_count_roundtrip(tmp_path, capsys):
    out = tmp_path / "field.bin"
    assert run_cli(
        "sample", "--dim", "2", "--n", "25", "--seed", "5", "--trial", "1",
        "--grid", "16", "--out", str(out),
    ) == 0
    grid = gridio.read_grid(str(out))
    assert grid.M == 16 and grid.seed == 5 and grid.trial_index == 1

    report = tmp_path / "count.json"
    assert run_cli("count", "--in", str(out), "--report", str(report)) == 0
    payload = json.loads(report.read_text())
    assert payload["r"] >= 1 and payload["k"] >= 0
    assert sum(payload["domain_volumes"]) == pytest.approx(1.0, abs=1e-9)
    assert set(payload) >= {"k", "r", "alpha", "beta", "certified", "refinement_levels"}


def test_count_rejects_tampered_grid(tmp_path, capsys):
    out = tmp_path / "field.bin"
    run_cli("sample", "--dim", "2", "--n", "25", "--seed", "5", "--trial", "0",
            "--grid", "16", "--out", str(out))
    blob = bytearray(out.read_bytes())
    blob[60] ^= 0xFF  # flip a bit inside the data section
    out.write_bytes(bytes(blob))
    assert run_cli("count", "--in", str(out)) == 2


def test_count_with_gradient_files(tmp_path):
    from arw import field, lattice

    out = tmp_path / "field.bin"
    run_cli("sample", "--dim", "2", "--n", "25", "--seed", "5", "--trial", "0",
            "--grid", "16", "--out", str(out))
    shell = lattice.enumerate_shell(2, 25)
    sample = field.sample_coefficients(shell, 5, 0)
    grads = []
    for axis in range(2):
        gpath = tmp_path / f"grad{axis}.bin"
        gridio.write_grid(str(gpath), field.eval_grid(sample, 16, (axis,)))
        grads.append(str(gpath))
    assert run_cli("count", "--in", str(out), "--grad-in", grads[0], "--grad-in", grads[1]) == 0


def test_algebra_command(capsys):
    assert run_cli("algebra", "--verify-identities", "--dmax", "6",
                   "--jacobian-example", "2", "2") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["passed"] is True
    assert payload["identities"]["d_max"] == 6
    assert payload["jacobian_example"]["passed"] is True


def test_config_canonicalization_idempotent(tmp_path):
    text = MINIMAL_CONFIG.format(csv="a.csv", report="r.json")
    canon = canonicalize(text)
    assert canonicalize(canon) == canon


def test_config_unknown_key_rejected():
    text = MINIMAL_CONFIG.format(csv="a.csv", report="r.json") + "wibble = 3\n"
    with pytest.raises(ValidationError, match="wibble"):
        from_ini(text)


def test_config_unknown_section_rejected():
    text = MINIMAL_CONFIG.format(csv="a.csv", report="r.json") + "\n[extra]\nx = 1\n"
    with pytest.raises(ValidationError, match="extra"):
        from_ini(text)


def test_config_parse_error_reports_line():
    with pytest.raises(ConfigParseError, match="line"):
        from_ini("not an ini file at all\n")


def test_config_validation_errors():
    with pytest.raises(ValidationError, match="n_values"):
        from_ini("[experiment]\nd = 2\npolicy = explicit\n\n[output]\ncsv = a\nreport = b\n")
    with pytest.raises(ValidationError, match="m_policy"):
        from_ini(
            "[experiment]\nd = 2\npolicy = explicit\nn_values = 25\nm_policy = junk\n"
            "\n[output]\ncsv = a\nreport = b\n"
        )


def test_experiment_run_minimal(tmp_path, capsys):
    csv_path = tmp_path / "trials.csv"
    report_path = tmp_path / "report.json"
    config = tmp_path / "run.ini"
    config.write_text(MINIMAL_CONFIG.format(csv=csv_path, report=report_path))
    assert run_cli("experiment", "--config", str(config)) == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 3  # header + 2 trials
    payload = json.loads(report_path.read_text())
    assert payload["records"] == 2
    # 2 trials cannot support concentration statistics; degrade, not fail
    assert payload["concentration"] is None


def test_experiment_rerun_identical_csv(tmp_path):
    csv_path = tmp_path / "trials.csv"
    report_path = tmp_path / "report.json"
    config = tmp_path / "run.ini"
    config.write_text(MINIMAL_CONFIG.format(csv=csv_path, report=report_path))
    run_cli("experiment", "--config", str(config))
    rows_a = [
        line.rsplit(",", 1)[0] for line in csv_path.read_text().splitlines()
    ]  # strip wall_time_ms
    run_cli("experiment", "--config", str(config))
    rows_b = [line.rsplit(",", 1)[0] for line in csv_path.read_text().splitlines()]
    assert rows_a == rows_b


def test_experiment_unknown_key_exit_code(tmp_path, capsys):
    config = tmp_path / "bad.ini"
    config.write_text("[experiment]\nd = 2\nbogus = 1\n")
    assert run_cli("experiment", "--config", str(config)) == 2
    assert "bogus" in capsys.readouterr().err


def test_experiment_with_plots(tmp_path):
    csv_path = tmp_path / "trials.csv"
    report_path = tmp_path / "report.json"
    plots = tmp_path / "plots"
    config = tmp_path / "run.ini"
    config.write_text(MINIMAL_CONFIG.format(csv=csv_path, report=report_path))
    assert run_cli(
        "experiment", "--config", str(config), "--trials", "35", "--plots-dir", str(plots)
    ) == 0
    for name in ("count_vs_L.csv", "variance_vs_dim.csv", "tail_vs_dim.csv"):
        series = (plots / name).read_text().splitlines()
        assert series[0] == "x,y,series"
        assert len(series) > 1


def test_verify_suite_passes(capsys):
    assert run_cli("verify") == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_verify_suite_fault_injection(capsys):
    assert run_cli("verify", "--fault", "parseval") == 1
    out = capsys.readouterr().out
    assert "parseval_fft_direct  FAIL" in out.replace("   ", "  ") or "FAIL" in out


def test_verify_suite_repeatable(capsys):
    cli.verify_suite()
    first = [(c.name, c.passed) for c in cli.verify_suite()]
    second = [(c.name, c.passed) for c in cli.verify_suite()]
    assert first == second
