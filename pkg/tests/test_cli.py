import csv
import json
from pathlib import Path

import numpy as np
import pytest

from memstoch import cli
from memstoch.config import ConfigError, apply_overrides, load_config
from memstoch.data import write_idx


@pytest.fixture(scope="module")
def tiny_mnist(tmp_path_factory):
    d = tmp_path_factory.mktemp("mnist")
    gen = np.random.default_rng(0)
    labels = np.arange(60) % 10
    imgs = (gen.random((60, 784)) * 60).astype(np.uint8)
    for c in range(10):
        imgs[labels == c, c * 78:(c + 1) * 78] = 230
    write_idx(imgs[:40], labels[:40], d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    write_idx(imgs[40:], labels[40:], d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return d


def small_config(tmp_path, data_dir, mode="float", **kw):
    cfg = {"mode": mode, "topology": [784, 8, 10], "epochs": 1,
           "data": {"data_dir": str(data_dir)}, "output_dir": str(tmp_path / "run")}
    cfg.update(kw)
    path = tmp_path / f"{mode}.json"
    path.write_text(json.dumps(cfg))
    return path


class TestTrain:
    def test_writes_outputs_and_figure(self, tmp_path, tiny_mnist, capsys):
        path = small_config(tmp_path, tiny_mnist, "stochastic-memristive")
        assert cli.main(["train", "--config", str(path), "--set", "epochs=2"]) == 0
        out = tmp_path / "run"
        with open(out / "metrics.csv") as f:
            assert len(list(csv.DictReader(f))) == 2
        assert (out / "training_curves.png").stat().st_size > 0
        assert "checkpoint:" in capsys.readouterr().out

    def test_no_plot(self, tmp_path, tiny_mnist):
        path = small_config(tmp_path, tiny_mnist)
        assert cli.main(["train", "--config", str(path), "--no-plot",
                         "--output-dir", str(tmp_path / "other")]) == 0
        assert (tmp_path / "other" / "metrics.csv").exists()
        assert not (tmp_path / "other" / "training_curves.png").exists()

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["train", "--config", str(tmp_path / "nope.json")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        assert cli.main(["train", "--set", "device.sigma=0.1"]) == 2
        assert "device.sigma" in capsys.readouterr().err

    def test_negative_sigma(self, capsys):
        assert cli.main(["train", "--set", "device.sigma_ratio=-1"]) == 2
        assert "device.sigma_ratio" in capsys.readouterr().err

    def test_missing_data(self, tmp_path):
        assert cli.main(["train", "--set", f'data.data_dir="{tmp_path}"',
                         "--output-dir", str(tmp_path / "r")]) == 2


class TestSweepAndStudy:
    def test_sweep_rows_and_dedupe(self, tmp_path, tiny_mnist, capsys):
        path = small_config(tmp_path, tiny_mnist, "stochastic-memristive")
        assert cli.main(["sweep-sigma", "--config", str(path), "--sigmas", "0.1,1.0,0.1"]) == 0
        with open(tmp_path / "run" / "sweep_sigma.csv") as f:
            rows = list(csv.DictReader(f))
        assert [r["sigma_ratio"] for r in rows] == ["0.1", "1"]
        assert (tmp_path / "run" / "sweep_sigma.png").exists()
        assert "shape:" in capsys.readouterr().out

    def test_noise_study(self, tmp_path, tiny_mnist):
        (tmp_path / "f").mkdir()
        (tmp_path / "s").mkdir()
        f = small_config(tmp_path / "f", tiny_mnist)
        s = small_config(tmp_path / "s", tiny_mnist, "stochastic-ideal-weights")
        assert cli.main(["train", "--config", str(f), "--no-plot"]) == 0
        assert cli.main(["train", "--config", str(s), "--no-plot"]) == 0
        out = tmp_path / "noise"
        code = cli.main(["noise-study", "--float-ckpt", str(tmp_path / "f/run/checkpoint.npz"),
                         "--stochastic-ckpt", str(tmp_path / "s/run/checkpoint.npz"),
                         "--variances", "0,0.2", "--repetitions", "2",
                         "--output-dir", str(out)])
        assert code == 0
        with open(out / "noise_study.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 3
        assert all(float(r["degradation"]) == 0.0 for r in rows if r["sigma_i_sq"] == "0")
        for name in ("noise_config.json", "noise_study.png", "noisy_digit.png"):
            assert (out / name).exists()

    def test_noise_study_missing_checkpoint(self, tmp_path, capsys):
        code = cli.main(["noise-study", "--float-ckpt", str(tmp_path / "a.npz"),
                         "--stochastic-ckpt", str(tmp_path / "b.npz")])
        assert code == 2
        assert "checkpoint not found" in capsys.readouterr().err


class TestMisc:
    def test_encode_bench(self, capsys):
        assert cli.main(["encode-bench", "--bl", "2,100", "--trials", "20000"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "bl,analytic_mean,empirical_mean,analytic_var,empirical_var"
        for line in lines[1:]:
            bl, am, em, av, ev = map(float, line.split(","))
            assert abs(em - am) < 5 * np.sqrt(av / 20000)
            assert ev == pytest.approx(av, rel=0.1)

    def test_encode_bench_function(self):
        rows = cli.encode_bench([10], 0.5, 0.5, 5000, 0)
        assert rows[0]["analytic_var"] == pytest.approx(0.25 * 0.75 / 10)

    def test_eval(self, tmp_path, tiny_mnist, capsys):
        path = small_config(tmp_path, tiny_mnist, "stochastic-ideal-weights")
        assert cli.main(["train", "--config", str(path), "--no-plot"]) == 0
        capsys.readouterr()
        ckpt = str(tmp_path / "run" / "checkpoint.npz")
        assert cli.main(["eval", "--checkpoint", ckpt, "--mode", "stochastic",
                         "--repetitions", "3", "--noise-variance", "0.1"]) == 0
        assert "on 20 images" in capsys.readouterr().out

    def test_eval_missing_checkpoint(self, tmp_path):
        assert cli.main(["eval", "--checkpoint", str(tmp_path / "x.npz")]) == 2

    def test_plot_curves(self, tmp_path, tiny_mnist):
        path = small_config(tmp_path, tiny_mnist)
        cli.main(["train", "--config", str(path), "--no-plot"])
        out = tmp_path / "curves.png"
        assert cli.main(["plot-curves", str(tmp_path / "run"), "--out", str(out)]) == 0
        assert out.exists()

    def test_schema(self, capsys):
        assert cli.main(["schema"]) == 0
        schema = json.loads(capsys.readouterr().out)
        assert "sigma_ratio" in json.dumps(schema)


class TestConfig:
    def test_overrides_parse_json(self):
        data = apply_overrides({}, ["device.sigma_ratio=0.3", "mode=float", "topology=[4,2]"])
        assert data == {"device": {"sigma_ratio": 0.3}, "mode": "float", "topology": [4, 2]}

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            apply_overrides({}, ["epochs"])

    def test_learning_rate_schedule(self):
        cfg = load_config(None, ["schedule.eta0=0.5", "schedule.gamma=0.5"])
        assert [cfg.schedule.eta(e) for e in range(3)] == [0.5, 0.25, 0.125]

    @pytest.mark.parametrize("name", ["desk_float", "desk_stochastic", "desk_memristive",
                                      "full_float", "full_stochastic_bl10",
                                      "full_stochastic_bl100", "full_memristive"])
    def test_shipped_configs_validate(self, name):
        load_config(Path(__file__).parents[1] / "configs" / f"{name}.json")
