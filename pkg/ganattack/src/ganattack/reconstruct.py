"""Checkpoint inference: feature tensors in, reconstructed images out."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .data import PairDataset
from .models import DiscriminatorSpec, GeneratorSpec, build_models


def load_generator(checkpoint_path, device: torch.device = torch.device("cpu")):
    state = torch.load(checkpoint_path, map_location=device, weights_only=False)
    gspec = GeneratorSpec(**state["generator_spec"])
    dspec = DiscriminatorSpec(**state["discriminator_spec"])
    gen, _ = build_models(gspec, dspec)
    gen.load_state_dict(state["generator"])
    gen.to(device)
    gen.eval()   # dropout off: inference is deterministic
    return gen, gspec


def to_uint8(pm1: np.ndarray) -> np.ndarray:
    """[-1, 1] model output to 8-bit pixels."""
    return np.clip(np.floor((pm1 + 1.0) * 127.5), 0, 255).astype(np.uint8)


def reconstruct_tensor(gen, features: torch.Tensor) -> np.ndarray:
    """Run the generator on one 2 x H x W feature stack; returns H x W in [-1, 1]."""
    if features.ndim != 3:
        raise ValueError(f"expected 2 x H x W features, got {tuple(features.shape)}")
    with torch.no_grad():
        out = gen(features[None].to(next(gen.parameters()).device))
    return out[0, 0].cpu().numpy()


def reconstruct_split(checkpoint_path, manifest_path, out_dir,
                      split: str = "test", noise_level: float | None = None,
                      device: str = "cpu", grid_name: str = "grid.png") -> list[dict]:
    """Reconstruct every sample of a split; writes CIMT + PNG per sample and
    a tiled truth-vs-reconstruction grid image."""
    from PIL import Image

    from .cimt import write_tensor

    dev = torch.device(device)
    gen, _ = load_generator(checkpoint_path, dev)
    dataset = PairDataset(manifest_path, split=split, noise_level=noise_level)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows, results = [], []
    for idx in range(len(dataset)):
        features, target, sample_id = dataset[idx]
        recon = reconstruct_tensor(gen, features)
        write_tensor(out / f"{sample_id}_recon.cimt", recon.astype(np.float32))
        u8 = to_uint8(recon)
        Image.fromarray(u8, mode="L").save(out / f"{sample_id}_recon.png")
        truth8 = to_uint8(target[0].numpy())
        results.append({"id": sample_id, "recon": u8, "truth": truth8})
        if len(rows) < 8:
            rows.append(np.concatenate([truth8, u8], axis=1))
    if rows:
        Image.fromarray(np.concatenate(rows, axis=0), mode="L").save(out / grid_name)
    return results
