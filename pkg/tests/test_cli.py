import csv

import numpy as np
import pytest

from tamen import tt, ttio
from tamen.cli import (
    ConfigError, csv_header, emit_csv_row, load_config, main, snapshot_io,
)
from tamen.integrator import StepReport
from tamen.models.convection import ConvectionModel


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


GOLDEN = ("step,t_end,sweeps,residual,max_rank,mass_drift,norm_drift,"
          "mean_i1,mean_i2,mean_i3,mean_i4,mean_i5,wall_seconds")


def test_golden_header():
    assert ",".join(csv_header(5)) == GOLDEN
    assert ",".join(csv_header()) == ("step,t_end,sweeps,residual,max_rank,mass_drift,"
                                      "norm_drift,wall_seconds")


def test_emit_row_format():
    rep = StepReport(sweeps=2, residual=1e-6, max_rank=7)
    row = emit_csv_row(3, 0.15, rep, -1e-15, 2e-16, (0.1, 0.2), 1.5)
    assert row[0] == "3" and row[2] == "2" and row[4] == "7"
    assert row[1] == "1.500000000000000e-01"
    assert float(row[5]) >= 0 and float(row[6]) >= 0
    assert len(row) == len(csv_header(2))


@pytest.fixture(scope="module")
def convection_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("conv") / "conv.csv"
    code = main(["run-convection", "--levels", "8", "--steps", "20", "--cheb-points", "16",
                 "--out", str(out), "--snapshots-every", "10"])
    return code, out


def test_convection_run(convection_csv):
    code, out = convection_csv
    assert code == 0
    rows = _rows(out)
    assert ",".join(rows[0]) == ",".join(csv_header())
    body = rows[1:]
    assert len(body) == 20
    t = [float(r[1]) for r in body]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert t[-1] == pytest.approx(1.0)
    assert all(float(r[5]) >= 0 and float(r[6]) >= 0 for r in body)


def test_snapshot_reproduces_mass(convection_csv):
    _, out = convection_csv
    snap = out.parent / "conv_snapshots" / "step_00020.ttv"
    u = snapshot_io(snap)
    m = ConvectionModel(8)
    mass = tt.dot(m.mass_vector, u)
    drift = abs(mass - tt.dot(m.mass_vector, m.initial)) / tt.dot(m.mass_vector, m.initial)
    assert drift == pytest.approx(float(_rows(out)[20][5]), abs=1e-15)


def test_cme_run_drift_and_means(tmp_path):
    out = tmp_path / "cme.csv"
    assert main(["run-cme", "--steps", "20", "--out", str(out)]) == 0
    rows = _rows(out)
    assert ",".join(rows[0]) == GOLDEN
    assert len(rows) == 21
    assert max(float(r[5]) for r in rows[1:]) <= 1e-10


def test_invalid_eps_exits_1(tmp_path, capsys):
    assert main(["run-convection", "--eps", "0", "--out", str(tmp_path / "x.csv")]) == 1
    assert "eps" in capsys.readouterr().err


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run-convection", "--levels", "3", "--steps", "1",
                 "--out", str(blocker / "sub" / "x.csv")]) == 1


def test_config_priority(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("eps: 1.0e-4\nrho: 2\nsteps: 7\n")
    c = load_config("convection", cfg, env={"TAMEN_RHO": "3", "TAMEN_STEPS": "9"},
                    overrides={"steps": 11})
    assert (c.eps, c.rho, c.steps, c.cheb_points) == (1e-4, 3, 11, 32)
    assert load_config("cme", env={}).cheb_points == 80
    with pytest.raises(ConfigError):
        load_config("convection", env={"TAMEN_ETA": "0.5"})
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense_key: 1\n")
    with pytest.raises(ConfigError):
        load_config("convection", bad, env={})


def test_env_override_reaches_run(tmp_path, monkeypatch):
    out = tmp_path / "e.csv"
    monkeypatch.setenv("TAMEN_STEPS", "3")
    assert main(["run-convection", "--levels", "4", "--out", str(out)]) == 0
    assert len(_rows(out)) == 4


def test_deterministic_columns(tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"d{k}.csv"
        assert main(["run-convection", "--levels", "5", "--steps", "4", "--cheb-points", "8",
                     "--seed", "5", "--out", str(out)]) == 0
        runs.append([r[:-1] for r in _rows(out)])
    assert runs[0] == runs[1]


def test_snapshot_roundtrip_and_corruption(tmp_path, rng):
    x = tt.random_tt((2, 3, 4), 2, rng)
    p = tmp_path / "x.ttv"
    snapshot_io(p, x)
    y = snapshot_io(p)
    for a, b in zip(x.cores, y.cores):
        np.testing.assert_array_equal(a, b)
    raw = bytearray(p.read_bytes())
    raw[0] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(ttio.TTFormatError):
        snapshot_io(p)


def test_run_custom(tmp_path):
    A = tt.op_from_dense(np.array([[-1.0, 1.0], [1.0, -1.0]]), (2,))
    ttio.save_operator(tmp_path / "a.tto", A)
    ttio.save_vector(tmp_path / "x.ttv", tt.TTVector([np.array([1.0, 0.0]).reshape(1, 2, 1)]))
    out = tmp_path / "c.csv"
    code = main(["run-custom", "--operator", str(tmp_path / "a.tto"),
                 "--initial", str(tmp_path / "x.ttv"), "--constraints", "mass",
                 "--steps", "3", "--interval", "0.5", "--out", str(out)])
    assert code == 0
    assert float(_rows(out)[-1][5]) <= 1e-13
    assert main(["run-custom", "--out", str(out)]) == 1
