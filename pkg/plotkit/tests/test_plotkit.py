import numpy as np
import pytest

from plotkit import cli


def _make_csv(path, rows=50, drop=None, n=3, m=3):
    cols = (["t"] + [f"xi_{i}" for i in range(n)]
            + [f"mu_{i}" for i in range(n)] + [f"a_{i}" for i in range(m)]
            + ["energy", "res_constraint", "res_dirac", "res_advection"])
    if drop:
        cols = [c for c in cols if c != drop]
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 1.0, rows)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(rows):
            vals = []
            for c in cols:
                if c == "t":
                    vals.append(t[k])
                elif c.startswith("a_"):
                    # a unit-sphere path for the gamma plot
                    i = int(c.split("_")[1])
                    th = 0.4 + 0.1 * t[k]
                    point = [np.sin(th) * np.cos(3 * t[k]),
                             np.sin(th) * np.sin(3 * t[k]), np.cos(th)]
                    vals.append(point[i] if i < 3 else 0.0)
                elif c == "energy":
                    vals.append(2.0 + 1e-9 * rng.standard_normal())
                elif c.startswith("res_"):
                    vals.append(abs(rng.standard_normal()) * 1e-11)
                else:
                    vals.append(np.sin(t[k] + hash(c) % 7))
            fh.write(",".join("%.16e" % v for v in vals) + "\n")
    return str(path)


@pytest.mark.parametrize("kind", cli.KINDS)
def test_all_kinds_render(tmp_path, kind):
    csv = _make_csv(tmp_path / "traj.csv")
    out = tmp_path / f"{kind}.png"
    assert cli.main(["plot", csv, "--kind", kind, "--out", str(out)]) == 0
    assert out.stat().st_size > 1000


def test_single_row_renders(tmp_path):
    csv = _make_csv(tmp_path / "one.csv", rows=1)
    out = tmp_path / "one.png"
    assert cli.main(["plot", csv, "--kind", "energy", "--out", str(out)]) == 0
    assert out.exists()


def test_missing_column_reports_diff(tmp_path, capsys):
    csv = _make_csv(tmp_path / "bad.csv", drop="res_dirac")
    out = tmp_path / "bad.png"
    code = cli.main(["plot", csv, "--kind", "energy", "--out", str(out)])
    assert code == 2
    err = capsys.readouterr().err
    assert "missing columns: res_dirac" in err
    assert not out.exists()


def test_extra_column_reports_diff(tmp_path, capsys):
    csv = _make_csv(tmp_path / "extra.csv")
    text = open(csv).read().splitlines()
    text[0] += ",bogus"
    rows = [text[0]] + [r + ",0.0" for r in text[1:]]
    open(csv, "w").write("\n".join(rows) + "\n")
    assert cli.main(["plot", csv, "--kind", "energy",
                     "--out", str(tmp_path / "x.png")]) == 2
    assert "unexpected columns: bogus" in capsys.readouterr().err


def test_gamma_sphere_needs_three_components(tmp_path, capsys):
    csv = _make_csv(tmp_path / "m2.csv", m=2)
    code = cli.main(["plot", csv, "--kind", "gamma-sphere",
                     "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "three advected components" in capsys.readouterr().err


def test_rendering_is_deterministic(tmp_path):
    csv = _make_csv(tmp_path / "traj.csv")
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    cli.main(["plot", csv, "--kind", "residuals", "--out", str(out1)])
    cli.main(["plot", csv, "--kind", "residuals", "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_load_table_roundtrip(tmp_path):
    csv = _make_csv(tmp_path / "traj.csv", rows=7)
    table = cli.load_table(csv)
    assert len(table["t"]) == 7
    assert set(table) == set(cli._expected_columns(3, 3))


def test_renders_real_trajectory_output(tmp_path):
    nonholo_cli = pytest.importorskip("nonholo.cli")
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        '[model]\nname = "heavy_top"\ninertia = [2.0, 2.0, 1.0]\nl = 0.3\n'
        "omega0 = [0.2, -0.1, 2.0]\n"
        "gamma0 = [0.0, 0.38941834230865, 0.921060994002885]\n"
        "[integrator]\ndt = 1e-3\nt_final = 1.0\n")
    csv = tmp_path / "traj.csv"
    assert nonholo_cli.main(["run", str(cfg), "--output", str(csv)]) == 0
    for kind in cli.KINDS:
        out = tmp_path / f"real_{kind}.png"
        assert cli.main(["plot", str(csv), "--kind", kind,
                         "--out", str(out)]) == 0
        assert out.stat().st_size > 1000
