import json
import math

import numpy as np
import pytest

from ls2d import cli
from ls2d.errors import ConfigError


def test_config_round_trip():
    cfg = cli.RunConfig(shape="bean", contrast={"kind": "gaussian", "amplitude": 0.5, "width": 1.0},
                        kappa=10 * math.pi / 3, backend="pct", grid="2x33x17+65x65",
                        ladder=["2x9x5+17x17", "2x17x9+33x33"], tau0=0.08, accel=False)
    again = cli.RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_config_rejects_bad_input():
    with pytest.raises(ConfigError):
        cli.RunConfig.from_json('{"colour": "red"}')
    with pytest.raises(ConfigError):
        cli.RunConfig(backend="fmm")
    with pytest.raises(ConfigError):
        cli.RunConfig(grid="2x33")
    with pytest.raises(ConfigError):
        cli.RunConfig.from_json("[1, 2]")


def test_contrast_specs():
    x = np.array([0.0, 0.5])
    y = np.zeros(2)
    m = cli.RunConfig(contrast={"kind": "constant", "m": -0.3}).contrast_function()(x, y)
    assert np.allclose(m, -0.3)
    m = cli.RunConfig(contrast={"kind": "constant", "n": math.sqrt(2)}).contrast_function()(x, y)
    assert np.allclose(m, -1.0)
    m = cli.RunConfig(contrast={"kind": "gaussian"}).contrast_function()(x, y)
    assert np.allclose(m, 1 - 0.5 * np.exp(-x**2))


def test_default_tau0_respects_curvature():
    assert cli.default_tau0(cli.RunConfig().curve()) == pytest.approx(0.3)
    bean = cli.RunConfig(shape="bean").curve()
    assert cli.default_tau0(bean) < 1 / 11.69


def test_tables_round_trip(tmp_path):
    rows = [{"grid": "2x9x5+17x9", "unknowns": 243, "eps_inf": 0.125, "order_inf": float("nan"),
             "eps_2": 0.1, "order_2": float("nan"), "numIt": 8},
            {"grid": "2x17x9+33x17", "unknowns": 867, "eps_inf": 1 / 3, "order_inf": 2.5,
             "eps_2": 0.01, "order_2": 3.25, "numIt": 16}]
    p = tmp_path / "t.csv"
    cli.write_table_csv(p, cli.CONVERGENCE_COLUMNS, rows)
    back = cli.read_table_csv(p)
    for a, b in zip(rows, back):
        for key in a:
            if isinstance(a[key], float) and math.isnan(a[key]):
                assert math.isnan(b[key])
            else:
                assert a[key] == b[key]


def test_convergence_needs_three_grids():
    with pytest.raises(ConfigError):
        cli.run_convergence(cli.RunConfig(ladder=["2x9x5+17x9", "2x17x9+33x17"]))


def test_solve_command_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"grid": "2x17x9+33x17", "kappa": 2.0, "output_dir": str(tmp_path), "prefix": "disc"}))
    assert cli.main(["solve", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "disc_report.json").read_text())
    assert rep["schema"] == cli.REPORT_SCHEMA and rep["converged"]
    assert rep["errors"]["eps_inf"] < 1e-2
    x, y, u, us = cli.read_field_csv(tmp_path / "disc_field.csv")
    assert x.size == rep["unknowns"]
    assert np.allclose(u - us, np.exp(2j * x), atol=1e-12)
    header = (tmp_path / "disc_field.csv").read_text().splitlines()[0]
    assert header == ",".join(cli.FIELD_COLUMNS)


def test_flag_overrides(tmp_path):
    args = cli.build_parser().parse_args(["solve", "--backend", "pct", "--grid", "2x17x9+33x33", "--kappa", "3",
                                          "--no-accel", "--ladder", "2x9x5+17x17,2x17x9+33x33"])
    cfg = cli.config_from_args(args)
    assert (cfg.backend, cfg.grid, cfg.kappa, cfg.accel) == ("pct", "2x17x9+33x33", 3.0, False)
    assert cfg.ladder == ["2x9x5+17x17", "2x17x9+33x33"]


def test_bad_config_exits_nonzero(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"backend": "nope"}')
    assert cli.main(["solve", "--config", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("LS2D_THREADS", "3")
    assert cli.thread_count(cli.RunConfig(threads=7)) == 3
    monkeypatch.delenv("LS2D_THREADS")
    assert cli.thread_count(cli.RunConfig(threads=7)) == 7
