import json

import numpy as np
import pytest

from nonholo import cli, dynamics, models
from nonholo.dynamics import ReducedState

HEAVY_TOP_CFG = """\
# spinning top, short run
[model]
name = "heavy_top"
inertia = [2.0, 2.0, 1.0]
m = 1.0
g = 9.81
l = 0.3
omega0 = [0.2, 0.0, 2.0]
gamma0 = [0.0, 0.0, 1.0]

[integrator]
method = "midpoint"
dt = 1e-3
t_final = 0.2

[output]
format = "csv"
"""


# ------------------------------------------------------------ config parser

def test_parse_config_sections_and_types():
    cfg = cli.parse_config_text(
        '[a]\nx = 1\ny = 2.5  # trailing comment\nz = "s#tr"\n'
        'flag = true\narr = [1, 2.0, -3e-1]\n[b]\nempty = []\n')
    assert cfg["a"]["x"] == 1 and isinstance(cfg["a"]["x"], int)
    assert cfg["a"]["y"] == 2.5
    assert cfg["a"]["z"] == "s#tr"
    assert cfg["a"]["flag"] is True
    assert cfg["a"]["arr"] == [1, 2.0, -0.3]
    assert cfg["b"]["empty"] == []


@pytest.mark.parametrize("text", [
    "x = 1\n",                      # key outside a section
    "[a]\nno equals sign\n",
    "[a]\nx = [1, 2\n",             # unterminated array
    "[]\n",
    "[a]\nx = @bad\n",
])
def test_parse_config_rejects_malformed(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text(text)


def test_load_config_missing_file():
    with pytest.raises(cli.ConfigError):
        cli.load_config("/nonexistent/path.toml")


# --------------------------------------------------------------- csv schema

def test_csv_header_layout():
    assert cli.csv_header(2, 1) == ("t,xi_0,xi_1,mu_0,mu_1,a_0,"
                                    "energy,res_constraint,res_dirac,"
                                    "res_advection")


def _short_traj():
    sys = models.heavy_top(models.HeavyTopParams(
        inertia=np.array([2.0, 2.0, 1.0]), l=0.3))
    st = ReducedState(0.0, np.array([0.2, 0.0, 2.0]), np.array([0.0, 0.0, 1.0]))
    return dynamics.integrate(sys, st, 0.05, 1e-3)


def test_write_csv_round_trips_values(tmp_path):
    traj = _short_traj()
    path = tmp_path / "out.csv"
    cli.write_csv(traj, path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.shape[0] == len(traj)
    assert np.array_equal(data["t"], traj.times)
    assert np.array_equal(data["xi_2"], traj.xi[:, 2])
    assert np.array_equal(data["energy"], traj.energy)


def test_write_json_matches_csv_columns(tmp_path):
    traj = _short_traj()
    cli.write_json(traj, tmp_path / "out.json", {"model": "heavy_top"})
    doc = json.loads((tmp_path / "out.json").read_text())
    assert doc["metadata"]["model"] == "heavy_top"
    assert list(doc["columns"]["t"]) == [cli.FIELD_FMT % t for t in traj.times]
    assert set(doc["columns"]) == set(cli.csv_header(3, 3).split(","))


def test_sample_every_keeps_first_and_last(tmp_path):
    traj = _short_traj()
    path = tmp_path / "out.csv"
    cli.write_csv(traj, path, sample_every=7)
    lines = path.read_text().splitlines()
    assert len(lines) == 2 + len(range(0, len(traj), 7))  # header + rows + final
    assert lines[1].split(",")[0] == cli.FIELD_FMT % traj.times[0]
    assert lines[-1].split(",")[0] == cli.FIELD_FMT % traj.times[-1]


# --------------------------------------------------------------- exit codes

def _write_cfg(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_success_and_determinism(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, HEAVY_TOP_CFG)
    out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert cli.main(["run", cfg, "--output", out1]) == cli.EXIT_OK
    report = capsys.readouterr().out
    assert "verification:          PASS" in report
    assert cli.main(["run", cfg, "--output", out2]) == cli.EXIT_OK
    with open(out1, "rb") as f1, open(out2, "rb") as f2:
        assert f1.read() == f2.read()


def test_run_verification_failure(tmp_path, capsys):
    cfg = HEAVY_TOP_CFG + "\n[verify]\nenergy_tol = 1e-30\n"
    path = _write_cfg(tmp_path, cfg)
    code = cli.main(["run", path, "--output", str(tmp_path / "o.csv")])
    assert code == cli.EXIT_VERIFY
    assert "verification:          FAIL" in capsys.readouterr().out


def test_run_config_errors(tmp_path):
    bad_name = HEAVY_TOP_CFG.replace('"heavy_top"', '"no_such_model"')
    path = _write_cfg(tmp_path, bad_name)
    assert cli.main(["run", path, "--output", str(tmp_path / "o.csv")]) \
        == cli.EXIT_CONFIG
    bad_dt = HEAVY_TOP_CFG.replace("dt = 1e-3", "dt = -1.0")
    path = _write_cfg(tmp_path, bad_dt, "dt.toml")
    assert cli.main(["run", path, "--output", str(tmp_path / "o.csv")]) \
        == cli.EXIT_CONFIG
    assert cli.main(["run", str(tmp_path / "missing.toml"),
                     "--output", str(tmp_path / "o.csv")]) == cli.EXIT_CONFIG


def test_run_integration_failure_writes_partial(tmp_path, capsys):
    cfg = """\
[model]
name = "euler_disk"
omega0 = [0.0, 5.0, 0.0]

[integrator]
dt = 1e-3
t_final = 1.0
"""
    path = _write_cfg(tmp_path, cfg)
    out_path = tmp_path / "disk.csv"
    code = cli.main(["run", path, "--output", str(out_path)])
    assert code == cli.EXIT_INTEGRATION
    assert out_path.exists()
    lines = out_path.read_text().splitlines()
    assert 2 < len(lines) < 1002
    assert "partial trajectory" in capsys.readouterr().out


def test_run_flat_disk_start_is_integration_failure(tmp_path):
    cfg = """\
[model]
name = "euler_disk"
gamma0 = [0.0, 0.0, 1.0]

[integrator]
dt = 1e-3
t_final = 1.0
"""
    path = _write_cfg(tmp_path, cfg)
    code = cli.main(["run", path, "--output", str(tmp_path / "o.csv")])
    assert code == cli.EXIT_INTEGRATION


def test_run_rk4_oracle_method(tmp_path, capsys):
    cfg = HEAVY_TOP_CFG.replace('"midpoint"', '"rk4-oracle"')
    path = _write_cfg(tmp_path, cfg)
    code = cli.main(["run", path, "--output", str(tmp_path / "o.csv")])
    assert code == cli.EXIT_OK


def test_list_models_and_describe(capsys):
    assert cli.main(["list-models"]) == cli.EXIT_OK
    listed = capsys.readouterr().out.split()
    assert listed == sorted(models.REGISTRY)
    assert cli.main(["describe", "suslov_top"]) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert "suslov_top" in text and "parameters" in text
    assert cli.main(["describe", "nope"]) == cli.EXIT_CONFIG
