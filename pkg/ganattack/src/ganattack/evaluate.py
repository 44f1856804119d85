"""Reconstruction quality metrics: SSIM and PSNR, reported per noise level."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

PSNR_SENTINEL = 99.0   # stands in for infinite PSNR on identical images
_K1, _K2 = 0.01, 0.03
_WINDOW, _SIGMA = 11, 1.5


def _gaussian(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2-D filtering, valid region only."""
    from numpy.lib.stride_tricks import sliding_window_view

    k = len(kernel)
    rows = sliding_window_view(img, k, axis=1) @ kernel
    return sliding_window_view(rows, k, axis=0) @ kernel


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> float:
    """Mean structural similarity with the standard 11-tap Gaussian window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("SSIM needs two equal-shape 2-D images")
    if min(a.shape) < _WINDOW:
        raise ValueError(f"images must be at least {_WINDOW} pixels per side")
    kernel = _gaussian(_WINDOW, _SIGMA)
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2

    mu_a = _filter_valid(a, kernel)
    mu_b = _filter_valid(b, kernel)
    var_a = _filter_valid(a * a, kernel) - mu_a ** 2
    var_b = _filter_valid(b * b, kernel) - mu_b ** 2
    cov = _filter_valid(a * b, kernel) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at the identity sentinel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("PSNR needs equal-shape images")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return min(10.0 * math.log10(data_range ** 2 / mse), PSNR_SENTINEL)


def evaluate_pairs(entries) -> dict:
    """Score aligned (id, noise_level, reconstruction, truth) uint8 tuples.

    Returns per-sample rows plus mean SSIM/PSNR keyed by noise level.
    """
    rows = []
    for sample_id, level, recon, truth in entries:
        if recon.shape != truth.shape:
            raise ValueError(f"sample {sample_id}: misaligned shapes "
                             f"{recon.shape} vs {truth.shape}")
        rows.append({"id": sample_id, "noise_level": float(level),
                     "ssim": ssim(recon, truth), "psnr": psnr(recon, truth)})
    if not rows:
        raise ValueError("nothing to evaluate")
    by_level: dict = {}
    for row in rows:
        by_level.setdefault(row["noise_level"], []).append(row)
    summary = {level: {"count": len(group),
                       "mean_ssim": float(np.mean([r["ssim"] for r in group])),
                       "mean_psnr": float(np.mean([r["psnr"] for r in group]))}
               for level, group in sorted(by_level.items())}
    return {"rows": rows, "by_noise_level": summary}


def write_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["id", "noise_level", "ssim", "psnr"])
        writer.writeheader()
        writer.writerows(report["rows"])
    with open(out / "metrics.json", "w") as f:
        json.dump({str(k): v for k, v in report["by_noise_level"].items()}, f, indent=1)
