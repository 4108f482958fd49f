import csv
import json

import numpy as np
import pytest

from barymap import FlowModel, save_model
from barymap.cli import ConfigError, main, parse_config, parse_layer
from barymap.gaussian import GaussianLayer, GaussianParams

MOONS_CFG = """\
# small moons run
dataset = moons
seed = 0
n_train = 300
n_test = 150
layer = 4 * nb frame=random
eps = 0.1
"""


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "run.cfg").write_text(MOONS_CFG)
    return tmp_path


@pytest.fixture
def gaussian_model_file(tmp_path):
    params = [GaussianParams(np.array([0.0]), np.array([[1.0]])),
              GaussianParams(np.array([4.0]), np.array([[9.0]]))]
    model = FlowModel((GaussianLayer.from_params(params),), np.array([0.5, 0.5]), 1)
    path = tmp_path / "g1d.json"
    save_model(model, path)
    return path


def test_parse_config_and_layers():
    cfg = parse_config(MOONS_CFG + "layer = tree kappa=0.5 preprocess=false\nweights = 0.3, 0.7\n")
    assert len(cfg["schedule"]) == 5
    assert cfg["schedule"][-1].params == {"kappa": 0.5, "preprocess": False}
    assert cfg["weights"] == [0.3, 0.7]
    assert parse_layer("2 * gaussian")[0].kind == "gaussian"


@pytest.mark.parametrize("text, match", [
    ("seed = x\n", "line 1"),
    ("\nbogus = 1\n", "line 2: unknown key"),
    ("layer = spline\n", "unknown layer kind"),
    ("layer = nb wibble=3\n", "unknown nb parameters"),
    ("layer = two * nb\n", "repeat count"),
    ("trace = maybe\n", "true or false"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_fit_writes_outputs(workdir):
    assert main(["fit", "--config", "run.cfg", "--out", "run"]) == 0
    rows = read_rows(workdir / "run" / "metrics.csv")
    assert rows[0] == ["layer", "wd", "tc"]
    assert [r[0] for r in rows[1:]] == ["0", "4"]
    assert float(rows[2][1]) < float(rows[1][1])
    summary = json.loads((workdir / "run" / "summary.json").read_text())
    assert summary["layers"] == 4 and summary["wd_final"] < summary["wd_initial"]
    assert (workdir / "run" / "model.json").exists()


def test_fit_is_byte_identical(workdir):
    main(["fit", "--config", "run.cfg", "--out", "a"])
    main(["fit", "--config", "run.cfg", "--out", "b"])
    for name in ("model.json", "metrics.csv", "summary.json"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()


def test_trace_and_timing(workdir):
    assert main(["trace", "--config", "run.cfg", "--out", "t", "--timing"]) == 0
    rows = read_rows(workdir / "t" / "trace.csv")
    assert rows[0] == ["layer", "wd", "tc", "wall_time_ms"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]


def test_layer_flag_overrides(workdir):
    (workdir / "empty.cfg").write_text("dataset = moons\nn_train = 100\nn_test = 50\n")
    assert main(["fit", "--config", "empty.cfg", "--layer", "gaussian", "--out", "g"]) == 0
    assert json.loads((workdir / "g" / "summary.json").read_text())["layers"] == 1


def test_empty_schedule_is_usage_error(workdir, capsys):
    (workdir / "empty.cfg").write_text("dataset = moons\n")
    assert main(["fit", "--config", "empty.cfg", "--out", "nothing"]) == 2
    assert "schedule is empty" in capsys.readouterr().err
    assert not (workdir / "nothing").exists()


def test_gaussian_schedule_matches_analytic_cost(workdir):
    from barymap.datasets import GAUSSIAN_COVS, GAUSSIAN_MEANS
    from barymap.gaussian import gaussian_barycenter, gaussian_w2_squared
    (workdir / "g.cfg").write_text("dataset = gaussians\nlayer = gaussian\n")
    assert main(["fit", "--config", "g.cfg", "--out", "g"]) == 0
    params = [GaussianParams(np.array(m), np.array(c)) for m, c in zip(GAUSSIAN_MEANS, GAUSSIAN_COVS)]
    bary = gaussian_barycenter(params)
    analytic = np.mean([gaussian_w2_squared(p, bary) for p in params])
    tc = json.loads((workdir / "g" / "summary.json").read_text())["tc_final"]
    assert tc == pytest.approx(analytic, rel=0.05)


def test_generate_then_eval(workdir):
    assert main(["generate", "--config", "run.cfg", "--out", "data"]) == 0
    train = read_rows(workdir / "data" / "train.csv")
    assert len(train) == 600
    main(["fit", "--config", "run.cfg", "--out", "run"])
    assert main(["eval", "--model", "run/model.json", "--test", "data/test.csv",
                 "--out", "eval.csv"]) == 0
    fit_final = read_rows(workdir / "run" / "metrics.csv")[2]
    assert read_rows(workdir / "eval.csv")[1] == fit_final
    main(["eval", "--model", "run/model.json", "--test", "data/test.csv", "--out", "again.csv"])
    assert (workdir / "again.csv").read_bytes() == (workdir / "eval.csv").read_bytes()


def test_transform_known_value(gaussian_model_file, tmp_path):
    (tmp_path / "x.csv").write_text("1.0\n")
    out = tmp_path / "z.csv"
    assert main(["transform", "--model", str(gaussian_model_file), "--input",
                 str(tmp_path / "x.csv"), "--class", "0", "--out", str(out)]) == 0
    assert float(out.read_text()) == pytest.approx(4.0)


def test_transform_inverse_roundtrip(workdir):
    main(["fit", "--config", "run.cfg", "--out", "run"])
    pts = np.random.default_rng(0).uniform(-1, 2, (50, 2))
    np.savetxt(workdir / "p.csv", pts, delimiter=",")
    main(["transform", "--model", "run/model.json", "--input", "p.csv", "--class", "1", "--out", "z.csv"])
    main(["transform", "--model", "run/model.json", "--input", "z.csv", "--class", "1",
          "--inverse", "--out", "back.csv"])
    np.testing.assert_allclose(np.loadtxt(workdir / "back.csv", delimiter=","), pts, atol=1e-6)


def test_flip_same_class_bitwise(workdir):
    main(["fit", "--config", "run.cfg", "--out", "run"])
    text = "0.1,0.30000000000000004\n-1.25,2.5\n"
    (workdir / "p.csv").write_text(text)
    main(["flip", "--model", "run/model.json", "--input", "p.csv", "--from", "1", "--to", "1",
          "--out", "f.csv"])
    assert (workdir / "f.csv").read_text() == text


def test_unknown_class_and_bad_dimension(gaussian_model_file, tmp_path, capsys):
    (tmp_path / "x.csv").write_text("1.0\n")
    assert main(["transform", "--model", str(gaussian_model_file), "--input",
                 str(tmp_path / "x.csv"), "--class", "5"]) == 3
    (tmp_path / "y.csv").write_text("1.0,2.0\n")
    assert main(["flip", "--model", str(gaussian_model_file), "--input",
                 str(tmp_path / "y.csv"), "--from", "0", "--to", "1"]) == 3
    assert "columns" in capsys.readouterr().err


def test_corrupt_model_is_data_error(tmp_path, capsys):
    (tmp_path / "m.json").write_text('{"version": 1, "layers": [')
    (tmp_path / "x.csv").write_text("1.0\n")
    assert main(["transform", "--model", str(tmp_path / "m.json"), "--input",
                 str(tmp_path / "x.csv"), "--class", "0"]) == 3
    assert "line 1 column" in capsys.readouterr().err


def test_numeric_failure_exit_code(workdir):
    (workdir / "bad.cfg").write_text(
        "dataset = moons\nn_train = 50\nn_test = 20\nlayer = tree kappa=1.0\nlayer = tree kappa=0.0\n")
    assert main(["fit", "--config", "bad.cfg", "--out", "bad"]) == 4


def test_plot_data_schema(workdir, capsys):
    pytest.importorskip("matplotlib")
    main(["generate", "--config", "run.cfg", "--out", "data"])
    main(["fit", "--config", "run.cfg", "--out", "run"])
    assert main(["plot-data", "--model", "run/model.json", "--data", "data/test.csv",
                 "--out", "plot.csv", "--svg", "plot.svg"]) == 0
    rows = read_rows(workdir / "plot.csv")
    assert rows[0] == ["x0", "x1", "class", "role"]
    roles = {(r[2], r[3]) for r in rows[1:]}
    assert roles == {("0", "original"), ("0", "latent"), ("0", "flipped_to_1"),
                     ("1", "original"), ("1", "latent"), ("1", "flipped_to_0")}
    from barymap import load_csv, load_model
    model, data = load_model(workdir / "run/model.json"), load_csv(workdir / "data/test.csv")
    latent = np.array([[float(v) for v in r[:2]] for r in rows[1:] if r[2:] == ["1", "latent"]])
    np.testing.assert_array_equal(latent, model.transform(1, data[1]))
    first = (workdir / "plot.svg").read_bytes()
    main(["plot-data", "--model", "run/model.json", "--data", "data/test.csv",
          "--out", "plot.csv", "--svg", "plot.svg"])
    assert (workdir / "plot.svg").read_bytes() == first


def test_plot_data_skips_svg_when_not_2d(gaussian_model_file, tmp_path, capsys):
    (tmp_path / "d.csv").write_text("0.5,0\n1.5,1\n")
    out = tmp_path / "p.csv"
    assert main(["plot-data", "--model", str(gaussian_model_file), "--data",
                 str(tmp_path / "d.csv"), "--out", str(out), "--svg", str(tmp_path / "p.svg")]) == 0
    assert "notice" in capsys.readouterr().err
    assert out.exists() and not (tmp_path / "p.svg").exists()


def test_bad_arguments_exit_code():
    assert main(["fit", "--seed", "notanint"]) == 2
