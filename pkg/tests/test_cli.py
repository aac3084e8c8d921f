from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cpwall import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_density_closed_form_monotone(capsys):
    code, out, _ = run(capsys, "density", "--alpha", "1", "--distance", "1")
    assert code == 0
    rows = table(out)
    assert len(rows) == 31 and list(rows[0]) == ["u", "sigma_hat", "method"]
    vals = [float(r["sigma_hat"]) for r in rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_single_step_grid(capsys):
    code, out, _ = run(capsys, "density", "--alpha", "1", "--distance", "1", "--steps", "1")
    assert code == 0
    rows = table(out)
    assert len(rows) == 1 and rows[0]["sigma_hat"] == "1.70000000000e+01"


def test_si_column_and_float_format(capsys):
    _, out, _ = run(capsys, "density", "--alpha", "1e-30", "--distance", "1e-6", "--units", "SI",
                    "--steps", "2")
    rows = table(out)
    assert "sigma_physical" in rows[0]
    for cell in rows[0]["sigma_hat"], rows[0]["sigma_physical"]:
        mantissa = cell.split("e")[0]
        assert len(mantissa.replace("-", "").replace(".", "")) == 12


def test_alpha_required(capsys):
    code, _, err = run(capsys, "density", "--distance", "1")
    assert code == 2 and "alpha" in err


@pytest.mark.parametrize("argv", [
    ["density", "--alpha", "1", "--distance", "1", "--steps", "0"],
    ["density", "--alpha", "-1", "--distance", "1"],
    ["density", "--alpha", "1", "--distance", "1", "--rho-min", "2", "--rho-max", "1"],
    ["density", "--alpha", "1", "--distance", "1", "--method", "magic"],
    ["modes", "--schedule", "12:4"],
])
def test_config_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_config_file_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 1\ndistance = 1\nsteps = 3\nrho-max = 2\n")
    code, out, _ = run(capsys, "density", "--config", str(cfg), "--steps", "5")
    assert code == 0 and len(table(out)) == 5
    monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
    code, out, _ = run(capsys, "density")
    assert code == 0 and len(table(out)) == 3
    cfg.write_text("colour = red\n")
    assert run(capsys, "density")[0] == 2


def test_byte_identical_output(capsys):
    argv = ["density", "--alpha", "2", "--distance", "0.5", "--steps", "7", "--rho-max", "4"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_json_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "torque", "--axis-angle", "0.3", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    cfg = tmp_path / "echo.cfg"
    lines = []
    for k, v in payload["metadata"]["config"].items():
        lines.append(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")
    cfg.write_text("\n".join(lines) + "\n")
    code, again, _ = run(capsys, "torque", "--config", str(cfg))
    assert code == 0 and again == out
    assert payload["rows"][0][2] == pytest.approx(56 / 15 * math.sin(0.3), rel=1e-9)


def test_output_file(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "enclosed", "--steps", "3", "--rho-max", "1", "--output", str(path))
    assert code == 0 and out == ""
    text = path.read_text()
    assert "# half_force_radius = 5.29274279849e-01" in text
    assert table(text)[-1]["fraction"].startswith("8.526860")


def test_force_closed_form(capsys):
    code, out, _ = run(capsys, "force", "--alpha", "1", "--distance", "1", "--method", "closed_form")
    assert code == 0
    rows = {r["quantity"]: float(r["value"]) for r in table(out)}
    assert rows["wall_force_closed_form"] == pytest.approx(3 / (2 * math.pi), rel=1e-11)
    assert rows["atom_plus_wall"] == 0.0
    assert rows["deviation_closed_vs_integrated"] < 1e-10


@pytest.mark.slow
def test_force_both_paths(capsys):
    code, out, _ = run(capsys, "force", "--alpha", "1", "--distance", "1", "--method", "quadrature")
    assert code == 0
    rows = {r["quantity"]: float(r["value"]) for r in table(out)}
    assert rows["deviation_closed_vs_quadrature"] <= 1e-3
    assert rows["deviation_integrated_vs_quadrature"] <= 1e-3


def test_torque_full_plane(capsys):
    code, out, _ = run(capsys, "torque", "--region", "full_plane")
    assert code == 0 and abs(float(table(out)[0]["torque"])) < 1e-12


def test_modes_budget_exit_4_with_partial_output(capsys):
    code, out, err = run(capsys, "modes", "--schedule", "8:3:2.8,30:5:4.8", "--max-modes", "5000")
    assert code == 4 and "budget" in err
    rows = table(out)
    assert len(rows) == 1 and rows[0]["n_max"] == "8"


def test_modes_header_and_direction(capsys):
    code, out, _ = run(capsys, "modes", "--schedule", "12:4:3.6,16:4.4:4")
    assert code == 0
    header = [line for line in out.splitlines() if not line.startswith("#")][0]
    assert header == ",".join(cli.MODES_COLUMNS)
    rows = table(out)
    devs = [abs(float(r["deviation"])) for r in rows]
    assert all(math.isfinite(d) for d in devs) and devs[-1] <= devs[0]


def test_verify_quick_and_negative_control(capsys):
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 0
    rows = table(out)
    assert len(rows) >= 8 and all(r["passed"] == "true" for r in rows)
    code, out, _ = run(capsys, "verify", "--quick", "--inject-coefficient", "16")
    assert code == 1
    failed = {r["check"] for r in table(out) if r["passed"] == "false"}
    assert "plate_integral" in failed


def test_hidden_flag_not_in_help(capsys):
    with pytest.raises(SystemExit):
        cli.main(["density", "--help"])
    assert "inject" not in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cpwall", "enclosed", "--steps", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "R_over_d,fraction" in proc.stdout


def test_density_mode_sum(capsys):
    argv = ["density", "--alpha", "1", "--distance", "1", "--method", "mode_sum",
            "--schedule", "12:4:3.6", "--steps", "2"]
    code, _, err = run(capsys, *argv)
    assert code == 2 and "L1/2" in err
    code, out, _ = run(capsys, *argv, "--rho-max", "1")
    assert code == 0
    vals = [float(r["sigma_hat"]) for r in table(out)]
    assert all(r["method"] == "mode_sum" for r in table(out))
    assert 0 < vals[1] < vals[0] < 17
