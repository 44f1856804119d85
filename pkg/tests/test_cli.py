import json

import numpy as np
import pytest
from PIL import Image

from cimleak.cli import cli
from cimleak.dataset import PipelineConfig, load_manifest
from cimleak.tensorio import read_tensor

RNG = np.random.default_rng(31)


@pytest.fixture()
def workspace(tmp_path):
    """Tiny config + two input images, sized for fast CLI runs."""
    cfg = PipelineConfig.from_dict({
        "layer": {"out_channels": 4},
        "image_size": [16, 16],
        "noise_levels": [0.05, 0.1, 0.15, 0.2],
        "split_ratios": [0.5, 0.25, 0.25],
        "workers": 2,
        "seed": 3,
    })
    cfg_path = tmp_path / "config.json"
    cfg.save(cfg_path)
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    for i in range(2):
        arr = RNG.integers(0, 256, (16, 16)).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(img_dir / f"img{i}.png")
    return tmp_path, cfg_path, img_dir


def test_simulate_writes_grids_and_provenance(workspace):
    tmp, cfg_path, img_dir = workspace
    out = tmp / "run"
    rc = cli(["simulate", "--config", str(cfg_path), "--input", str(img_dir),
              "--out", str(out)])
    assert rc == 0
    assert (out / "config.json").exists()
    saved = PipelineConfig.from_json_file(out / "config.json")
    assert saved.to_dict() == PipelineConfig.from_json_file(cfg_path).to_dict()
    grid = read_tensor(out / "img0_parray.cimt")
    assert grid.shape == (16, 16, 8)
    assert read_tensor(out / "img0_output.cimt").shape == (16, 16, 4)


def test_features_and_plot(workspace):
    tmp, cfg_path, img_dir = workspace
    feats = tmp / "feats"
    rc = cli(["features", "--config", str(cfg_path), "--input", str(img_dir),
              "--out", str(feats)])
    assert rc == 0
    arr = read_tensor(feats / "img0_array.cimt")
    assert arr.shape == (16, 16) and arr.dtype == np.float32

    plots = tmp / "plots"
    rc = cli(["plot", "--config", str(cfg_path), "--out", str(plots),
              "--lut", "--features", str(feats / "img0")])
    assert rc == 0
    assert (plots / "adc_energy_lut.png").exists()
    assert (plots / "adc_energy_lut.csv").exists()
    assert (plots / "img0_array.png").exists()
    assert (plots / "img0_adc.png").exists()


def test_noise_variants(workspace):
    tmp, cfg_path, img_dir = workspace
    feats = tmp / "feats"
    assert cli(["features", "--config", str(cfg_path), "--input", str(img_dir),
                "--out", str(feats)]) == 0
    noisy = tmp / "noisy"
    rc = cli(["noise", "--config", str(cfg_path), "--input", str(feats),
              "--out", str(noisy), "--levels", "0.05,0.1,0.15,0.2"])
    assert rc == 0
    # four variants per sample, both matrices each
    made = sorted(p.name for p in noisy.glob("img0_n*_array.cimt"))
    assert made == ["img0_n005_array.cimt", "img0_n010_array.cimt",
                    "img0_n015_array.cimt", "img0_n020_array.cimt"]


def test_export_dataset(workspace):
    tmp, cfg_path, img_dir = workspace
    out = tmp / "dataset"
    rc = cli(["export", "--config", str(cfg_path), "--input", str(img_dir),
              "--out", str(out), "--levels", "0.0,0.2"])
    assert rc == 0
    manifest = load_manifest(out / "manifest.json")
    assert len(manifest["samples"]) == 4       # 2 images x 2 levels
    for s in manifest["samples"]:
        assert (out / s["array_pf"]).exists()
        assert (out / s["adc_pf"]).exists()
        assert (out / s["ground_truth"]).exists()


def test_lut_csv(workspace):
    tmp, cfg_path, _ = workspace
    out = tmp / "lut.csv"
    assert cli(["lut", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 257


def test_unknown_flag_exits_nonzero(workspace, capsys):
    _, cfg_path, img_dir = workspace
    rc = cli(["simulate", "--config", str(cfg_path), "--input", str(img_dir),
              "--out", "x", "--frobnicate"])
    assert rc == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_command_exits_nonzero():
    assert cli(["transmogrify"]) == 2


def test_invalid_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"device": {"g_min": 1e-6, "g_max": 1e-7}}))
    rc = cli(["lut", "--config", str(bad), "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_missing_input_dir_exits_one(workspace, capsys):
    tmp, cfg_path, _ = workspace
    rc = cli(["features", "--config", str(cfg_path), "--input", str(tmp / "nope"),
              "--out", str(tmp / "f")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_plot_requires_a_target(workspace, capsys):
    tmp, cfg_path, _ = workspace
    rc = cli(["plot", "--config", str(cfg_path), "--out", str(tmp / "p")])
    assert rc == 1
