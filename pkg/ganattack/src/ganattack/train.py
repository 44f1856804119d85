"""pix2pix training: adversarial min-max plus L1 reconstruction loss."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader

from .data import PairDataset
from .models import DiscriminatorSpec, GeneratorSpec, build_models

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1
    lr: float = 2e-4
    beta1: float = 0.5
    lambda_l1: float = 100.0
    adv_weight: float = 1.0
    seed: int = 0
    sample_every: int = 1        # epochs between reconstruction snapshots
    checkpoint_every: int = 0    # 0: only the final checkpoint
    select_by_val: bool = False  # keep the epoch with the best val L1
    max_val_samples: int = 64
    device: str = "auto"
    out_dir: str = "runs/attack"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lambda_l1 < 0 or self.adv_weight < 0:
            raise ValueError("loss weights must be >= 0")

    def resolve_device(self) -> torch.device:
        if self.device != "auto":
            return torch.device(self.device)
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")


def _grid_png(path, panels: list[np.ndarray]) -> None:
    """Tile [-1, 1] panels horizontally into one grayscale PNG."""
    from PIL import Image

    row = np.concatenate(panels, axis=1)
    u8 = np.clip(np.floor((row + 1.0) * 127.5), 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="L").save(path)


def _save_checkpoint(path, gen, disc, gspec, dspec, cfg, epoch) -> None:
    tmp = str(path) + ".tmp"
    torch.save({
        "generator": gen.state_dict(),
        "discriminator": disc.state_dict(),
        "generator_spec": asdict(gspec),
        "discriminator_spec": asdict(dspec),
        "train_config": asdict(cfg),
        "epoch": epoch,
    }, tmp)
    os.replace(tmp, path)


def train(manifest_path, cfg: TrainConfig, gspec: GeneratorSpec | None = None,
          dspec: DiscriminatorSpec | None = None, split: str = "train",
          noise_level: float | None = None, sample_source: str = "val") -> dict:
    """Alternating discriminator/generator updates over the manifest split.

    Writes checkpoint.pt, losses.csv and per-epoch reconstruction snapshots
    (samples/epoch_XXX.png: features | reconstruction | truth) to out_dir.
    Returns the loss history.
    """
    torch.manual_seed(cfg.seed)
    device = cfg.resolve_device()
    dataset = PairDataset(manifest_path, split=split, noise_level=noise_level)
    h = dataset[0][0].shape[-1]
    if gspec is None:
        depth = min(8, int(np.log2(h)))
        gspec = GeneratorSpec(image_size=h, depth=depth,
                              base_width=64 if h >= 256 else 32)
    if dspec is None:
        dspec = DiscriminatorSpec()
    gen, disc = build_models(gspec, dspec)
    gen.to(device)
    disc.to(device)

    loader = DataLoader(dataset, batch_size=cfg.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(cfg.seed),
                        drop_last=len(dataset) > cfg.batch_size)
    try:
        sample_set = PairDataset(manifest_path, split=sample_source,
                                 noise_level=noise_level)
    except ValueError:
        sample_set = dataset
    snap_x, snap_y, _ = sample_set[0]
    snap_x = snap_x[None].to(device)

    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=(cfg.beta1, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(cfg.beta1, 0.999))
    bce = nn.BCEWithLogitsLoss()
    l1 = nn.L1Loss()

    out = Path(cfg.out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    history = {"d_loss": [], "g_adv": [], "g_l1": [], "val_l1": []}
    best_val = float("inf")
    best_state = None

    def val_l1() -> float:
        gen.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            for i in range(min(len(sample_set), cfg.max_val_samples)):
                vx, vy, _ = sample_set[i]
                total += float(l1(gen(vx[None].to(device)), vy[None].to(device)))
                count += 1
        gen.train()
        return total / count

    for epoch in range(1, cfg.epochs + 1):
        sums = np.zeros(3)
        batches = 0
        for x, y, _ in loader:
            x, y = x.to(device), y.to(device)
            fake = gen(x)

            opt_d.zero_grad(set_to_none=True)
            pred_real = disc(torch.cat([x, y], dim=1))
            pred_fake = disc(torch.cat([x, fake.detach()], dim=1))
            d_loss = 0.5 * (bce(pred_real, torch.ones_like(pred_real))
                            + bce(pred_fake, torch.zeros_like(pred_fake)))
            d_loss.backward()
            opt_d.step()

            opt_g.zero_grad(set_to_none=True)
            pred = disc(torch.cat([x, fake], dim=1))
            g_adv = bce(pred, torch.ones_like(pred))
            g_l1 = l1(fake, y)
            (cfg.adv_weight * g_adv + cfg.lambda_l1 * g_l1).backward()
            opt_g.step()

            sums += [d_loss.item(), g_adv.item(), g_l1.item()]
            batches += 1

        means = sums / max(batches, 1)
        for key, value in zip(("d_loss", "g_adv", "g_l1"), means):
            history[key].append(float(value))
        v = val_l1() if cfg.select_by_val else float("nan")
        history["val_l1"].append(v)
        if cfg.select_by_val and v < best_val:
            best_val = v
            best_state = {k: t.detach().cpu().clone() for k, t in gen.state_dict().items()}
        log.info("epoch %d/%d d=%.3f g_adv=%.3f g_l1=%.3f val_l1=%.3f",
                 epoch, cfg.epochs, *means, v)

        if cfg.sample_every and (epoch % cfg.sample_every == 0 or epoch == cfg.epochs):
            gen.eval()
            with torch.no_grad():
                recon = gen(snap_x)[0, 0].cpu().numpy()
            gen.train()
            _grid_png(out / "samples" / f"epoch_{epoch:03d}.png",
                      [snap_x[0, 0].cpu().numpy(), snap_x[0, 1].cpu().numpy(),
                       recon, snap_y[0].numpy()])
        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            _save_checkpoint(out / f"checkpoint_{epoch:03d}.pt",
                             gen, disc, gspec, dspec, cfg, epoch)

    if cfg.select_by_val and best_state is not None:
        gen.load_state_dict(best_state)   # ship the best-validation epoch
    _save_checkpoint(out / "checkpoint.pt", gen, disc, gspec, dspec, cfg, cfg.epochs)
    with open(out / "losses.csv", "w") as f:
        f.write("epoch,d_loss,g_adv,g_l1,val_l1\n")
        for i in range(cfg.epochs):
            f.write(f"{i + 1},{history['d_loss'][i]!r},{history['g_adv'][i]!r},"
                    f"{history['g_l1'][i]!r},{history['val_l1'][i]!r}\n")
    with open(out / "history.json", "w") as f:
        json.dump(history, f)
    return history
