import numpy as np
import pytest
from click.testing import CliRunner

from ltikernels.cli import main
from ltikernels.io import read_model_csv, write_dataset_csv, write_signal_csv
from ltikernels.signals import Dataset, PiecewiseConstantSignal

EXP = "family=exponential; atoms=1:2"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def toy(tmp_path):
    u = PiecewiseConstantSignal([0.0, 0.2, 0.5], [1.0, -1.0, 0.5])
    t = np.array([0.1, 0.25, 0.4, 0.6, 0.9])
    y = np.array([0.05, 0.08, -0.02, 0.01, 0.03])
    write_signal_csv(tmp_path / "u.csv", u)
    write_dataset_csv(tmp_path / "data.csv", Dataset(t, y))
    return tmp_path


def _identify(runner, root, out, *extra):
    args = ["identify", "--input", str(root / "u.csv"), "--data", str(root / "data.csv"),
            "--out", str(root / out), *extra]
    return runner.invoke(main, args)


def test_identify_single_kernel(runner, toy):
    res = _identify(runner, toy, "o", "--kernel", EXP, "--lambda", "0.1", "--grid", "0,1,11", "--gram-csv")
    assert res.exit_code == 0, res.output
    times, c, meta = read_model_csv(toy / "o" / "model.csv")
    assert c.shape == (5,) and float(meta["lambda"]) == 0.1
    assert meta["kernel"].startswith("family=exponential")
    h = np.loadtxt(toy / "o" / "h.csv", delimiter=",", skiprows=1)
    y = np.loadtxt(toy / "o" / "y.csv", delimiter=",", skiprows=1)
    assert h.shape == (11, 2) and y.shape == (11, 2)
    assert y[0, 0] == 0.0 and y[-1, 0] == 1.0
    assert (toy / "o" / "gram.csv").read_text().startswith("i,j,value\n")


def test_identify_is_deterministic(runner, toy):
    for out in ("a", "b"):
        assert _identify(runner, toy, out, "--kernel", EXP, "--gcv").exit_code == 0
    for name in ("model.csv", "h.csv", "y.csv", "gcv.csv"):
        assert (toy / "a" / name).read_bytes() == (toy / "b" / name).read_bytes()


def test_identify_gcv_grid(runner, toy):
    res = _identify(runner, toy, "g", "--kernel", EXP, "--gcv", "--lambda-grid", "1e-4,1,5")
    assert res.exit_code == 0, res.output
    gcv = np.loadtxt(toy / "g" / "gcv.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(gcv[:, 0], np.geomspace(1e-4, 1, 5))
    _, _, meta = read_model_csv(toy / "g" / "model.csv")
    best = gcv[np.flatnonzero(gcv[:, 1] == gcv[:, 1].min())[-1], 0]
    assert float(meta["lambda"]) == best


def test_identify_dictionary(runner, toy):
    res = _identify(runner, toy, "d", "--kernel", "family=warped; atoms=1:1; k=1",
                    "--kernel", "family=warped; atoms=1:10; k=1", "--lambda", "0.01")
    assert res.exit_code == 0, res.output
    w = np.loadtxt(toy / "d" / "weights.csv", delimiter=",", skiprows=1)
    assert w.shape == (2, 3) and w[:, 2].sum() == pytest.approx(1.0)
    _, c, meta = read_model_csv(toy / "d" / "model.csv")
    assert c.size == 5 and len(meta["weights"].split(",")) == 2


def test_identify_missing_file(runner, toy):
    res = runner.invoke(main, ["identify", "--input", str(toy / "nope.csv"), "--data", str(toy / "data.csv"),
                               "--kernel", EXP, "--lambda", "1", "--out", str(toy / "o")])
    assert res.exit_code == 2
    assert "nope.csv" in res.output


def test_identify_bad_kernel_and_lambda(runner, toy):
    assert _identify(runner, toy, "o", "--kernel", "family=bogus", "--lambda", "1").exit_code == 2
    assert _identify(runner, toy, "o", "--kernel", EXP).exit_code == 2
    assert _identify(runner, toy, "o", "--kernel", EXP, "--lambda", "1", "--gcv").exit_code == 2
    assert _identify(runner, toy, "o", "--kernel", EXP, "--lambda", "-1").exit_code == 2


def test_identify_malformed_data(runner, toy):
    (toy / "data.csv").write_text("t,y\n0.1,0.2\n0.3,abc\n")
    res = _identify(runner, toy, "o", "--kernel", EXP, "--lambda", "1")
    assert res.exit_code == 2 and "3" in res.output


def test_diagnose(runner, tmp_path):
    res = runner.invoke(main, ["diagnose", "--kernel", "family=warped; atoms=1:1; k=1",
                               "--horizons", "5,10,20", "--csv", str(tmp_path / "s.csv"),
                               "--degree-csv", str(tmp_path / "d.csv")])
    assert res.exit_code == 0, res.output
    assert "verdict: bounded" in res.output
    assert "relative degree at t=0.5: 2" in res.output
    rows = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert rows[:, 0].tolist() == [5.0, 10.0, 20.0]
    deg = np.loadtxt(tmp_path / "d.csv", delimiter=",", skiprows=1)
    assert deg[:, 1].tolist() == [2, 2, 2]


def test_diagnose_bad_horizons(runner):
    res = runner.invoke(main, ["diagnose", "--kernel", EXP, "--horizons", "5,x"])
    assert res.exit_code == 2


def test_experiment_command(runner, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# tiny\nn_runs = 1\nn_samples = 12\nm = 4\nlambda_count = 6\nfit_nodes = 101\n")
    res = runner.invoke(main, ["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.exit_code == 0, res.output
    out = tmp_path / "o"
    assert (out / "report.csv").read_text().startswith("run,seed,r,fit_h,fit_y")
    assert (out / "summary.csv").exists() and (out / "config.txt").exists()
    assert (out / "curve_h_run0_r1.csv").exists()
    assert "fit_h" in res.output


def test_experiment_unknown_key(runner, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("n_runs = 1\ncolour = red\n")
    res = runner.invoke(main, ["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2 and "colour" in res.output and "2" in res.output
