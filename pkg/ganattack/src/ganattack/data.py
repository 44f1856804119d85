"""Dataset over an exported manifest: feature-matrix pairs in, images out."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from .cimt import CimtError, load_manifest, manifest_samples


def _to_pm1(matrix: np.ndarray) -> np.ndarray:
    """Rescale one matrix to [-1, 1] by its own range (constant -> zeros)."""
    lo, hi = float(matrix.min()), float(matrix.max())
    if hi <= lo:
        return np.zeros_like(matrix, dtype=np.float32)
    return (2.0 * (matrix - lo) / (hi - lo) - 1.0).astype(np.float32)


class PairDataset(Dataset):
    """(2 x H x W feature stack, 1 x H x W target image) training pairs.

    Feature matrices are rescaled to [-1, 1] per matrix; images map from
    [0, 255] to [-1, 1]. A missing tensor aborts with the sample id.
    """

    def __init__(self, manifest_path, split: str | None = None,
                 noise_level: float | None = None):
        self.root = Path(manifest_path).parent
        manifest = load_manifest(manifest_path)
        self.samples = manifest_samples(manifest, split, noise_level)
        if not self.samples:
            raise ValueError(f"no samples for split={split!r} "
                             f"noise_level={noise_level!r} in {manifest_path}")

    def __len__(self) -> int:
        return len(self.samples)

    def _load(self, sample: dict, key: str) -> np.ndarray:
        from .cimt import read_tensor

        path = self.root / sample[key]
        try:
            return read_tensor(path)
        except (OSError, CimtError) as exc:
            raise RuntimeError(f"sample {sample['id']}: cannot load {key}: {exc}") from exc

    def __getitem__(self, idx: int):
        sample = self.samples[idx]
        array_pf = _to_pm1(self._load(sample, "array_pf").astype(np.float64))
        adc_pf = _to_pm1(self._load(sample, "adc_pf").astype(np.float64))
        image = self._load(sample, "ground_truth").astype(np.float32) / 127.5 - 1.0
        features = torch.from_numpy(np.stack([array_pf, adc_pf]))
        target = torch.from_numpy(image[None, :, :])
        return features, target, sample["id"]
