import csv
import json

import numpy as np
import pytest

from oneatomlaser import analytic as an
from oneatomlaser.cli import TOL, load_config, main, parse_config, write_wigner
from oneatomlaser.errors import ConfigError

SMALL_FIG7 = """\
scenario = fig7
delta_prime = 0.9
g = 0.1
omega = 0.3
omega1p = 0.05
omega2p = 0.1
kappa = 0.05   # strong loss so a short run has jumps
dt = 0.02
t_max = 60
n_traj = 4
fock_dim = 6
master_seed = 11
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_parse_config_comments_and_types():
    v = parse_config("# header\nscenario = fig2\nkappa = 2  # loss\nn_traj=5\n\n")
    assert v == {"scenario": "fig2", "kappa": 2.0, "n_traj": 5}


@pytest.mark.parametrize("text", ["kappa 2\n", "bogus = 1\n", "n_traj = 2.5\n", "kappa = x\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_rules(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "kappa = 1\n"))  # no scenario
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "scenario = fig5\nkappa = 0\n"))  # missing Lambda keys
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, SMALL_FIG7.replace("kappa = 0.05", "kappa = 0")))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, SMALL_FIG7), {"master_seed": -1})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    cfg = load_config(write(tmp_path, SMALL_FIG7), {"n_traj": 7, "dt": None})
    assert cfg.get("n_traj") == 7 and cfg.get("dt") == 0.02


def test_main_usage_errors(tmp_path, capsys):
    assert main(["run", "--config", str(write(tmp_path, "bogus = 1\n"))]) == 1
    assert main(["run", "--config", str(write(tmp_path, "kappa = 1\n")), "--scenario", "fig9"]) == 1
    assert main([]) == 1
    assert "config error" in capsys.readouterr().err


def test_fig2_output(tmp_path, capsys):
    cfg = write(tmp_path, "scenario = fig2\nkappa = 1\nt_max = 10\ndt = 0.05\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    header, data = read_csv(tmp_path / "o" / "fig2.csv")
    assert header[0] == "time" and "q1_nss1" in header and "q2_nss10" in header
    assert data.shape == (201, 9)
    s = json.loads((tmp_path / "o" / "fig2_summary.json").read_text())
    assert s["passed"] and s["tolerances"]["q_final"] == TOL["q_final"]
    assert s["effective_by_mean_photon"]["nss5"]["g_eff"] == pytest.approx(5 ** 0.5)
    assert "PASS" in capsys.readouterr().out


def test_fig3_fig4_columns(tmp_path):
    for name, col, oracle in (("fig3", "entropy_exact_nss1", None), ("fig4", "inversion_nss1", an.f_t)):
        cfg = write(tmp_path, f"scenario = {name}\nkappa = 1\nt_max = 2\ndt = 0.5\n", f"{name}.cfg")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        header, data = read_csv(tmp_path / name / f"{name}.csv")
        np.testing.assert_allclose(data[:, 0], [0, 0.5, 1, 1.5, 2])
        if oracle:
            sol = an.AnalyticSolution(1.0, 1.0)
            np.testing.assert_allclose(data[:, header.index(col)], oracle(sol, data[:, 0]), rtol=1e-11)


def test_fig7_small_run_is_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL_FIG7)
    outs = []
    for k, workers in enumerate(("1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--workers", workers]) == 0
        outs.append(out)
    a, b = (o / "fig7.csv" for o in outs)
    assert a.read_bytes() == b.read_bytes()
    header, data = read_csv(a)
    assert "mean_photon_stderr" in header and "p1_env_hi" in header
    sa = json.loads((outs[0] / "fig7_summary.json").read_text())
    sb = json.loads((outs[1] / "fig7_summary.json").read_text())
    sa["parameters"].pop("workers", None)
    sb["parameters"].pop("workers", None)
    assert sa == sb
    assert sa["seeds"] == {"master_seed": 11, "n_traj": 4}
    # a different seed changes the trajectories
    out = tmp_path / "o9"
    main(["run", "--config", str(cfg), "--out", str(out), "--seed", "12"])
    assert (out / "fig7.csv").read_bytes() != a.read_bytes()


def test_wigner_csv_layout(tmp_path):
    w = np.arange(6.0).reshape(2, 3)
    write_wigner(tmp_path / "w.csv", [-1, 0, 1], [-0.5, 0.5], w)
    rows = list(csv.reader(open(tmp_path / "w.csv")))
    assert rows[0] == ["y\\x", "-1", "0", "1"]
    assert rows[2] == ["0.5", "3", "4", "5"]


def test_validate_exit_code(tmp_path, monkeypatch):
    from oneatomlaser import cli
    cfg = write(tmp_path, "scenario = validate\nkappa = 1\n")
    monkeypatch.setattr(cli, "VALIDATE_RATIOS", (0.5,))
    monkeypatch.setattr(cli, "TOL", dict(TOL, analytic_vs_lindblad=1e-30))
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 2
