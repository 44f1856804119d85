import json

import numpy as np
import pytest

from ganattack.cimt import write_tensor
from ganattack.cli import cli

RNG = np.random.default_rng(77)


@pytest.fixture()
def dataset(tmp_path):
    tensors = tmp_path / "tensors"
    tensors.mkdir()
    samples = []
    splits = ["train"] * 4 + ["val"] + ["test"] * 2
    for i, split in enumerate(splits):
        arr = RNG.uniform(0, 1, (32, 32)).astype(np.float32)
        write_tensor(tensors / f"s{i}_array.cimt", arr)
        write_tensor(tensors / f"s{i}_adc.cimt", np.sqrt(arr).astype(np.float32))
        write_tensor(tensors / f"s{i}_gt.cimt",
                     RNG.integers(0, 256, (32, 32)).astype(np.uint8))
        samples.append({"id": f"s{i}", "array_pf": f"tensors/s{i}_array.cimt",
                        "adc_pf": f"tensors/s{i}_adc.cimt",
                        "ground_truth": f"tensors/s{i}_gt.cimt",
                        "noise_level": 0.0, "split": split})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"seed": 0, "ratios": [0.6, 0.2, 0.2],
                                    "samples": samples}))
    return tmp_path, manifest


def test_train_reconstruct_evaluate_chain(dataset):
    tmp, manifest = dataset
    run = tmp / "run"
    rc = cli(["train", "--manifest", str(manifest), "--out", str(run),
              "--epochs", "1", "--batch-size", "2", "--image-size", "32",
              "--depth", "5", "--base-width", "8", "--device", "cpu"])
    assert rc == 0
    assert (run / "checkpoint.pt").exists()

    rec = tmp / "recon"
    rc = cli(["reconstruct", "--checkpoint", str(run / "checkpoint.pt"),
              "--manifest", str(manifest), "--out", str(rec)])
    assert rc == 0
    assert (rec / "s5_recon.png").exists()
    assert (rec / "s6_recon.cimt").exists()

    metrics = tmp / "metrics"
    rc = cli(["evaluate", "--checkpoint", str(run / "checkpoint.pt"),
              "--manifest", str(manifest), "--out", str(metrics)])
    assert rc == 0
    report = json.loads((metrics / "metrics.json").read_text())
    assert report["0.0"]["count"] == 2


def test_bad_flag_exits_two():
    assert cli(["train", "--nonsense"]) == 2
    assert cli(["frobnicate"]) == 2


def test_missing_manifest_exits_one(tmp_path, capsys):
    rc = cli(["train", "--manifest", str(tmp_path / "none.json"),
              "--out", str(tmp_path / "o"), "--epochs", "1"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
