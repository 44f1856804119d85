"""Image ingestion, GAN-ready attack-pair export, and pipeline configuration.

The exported dataset is the interface consumed by the reconstruction model:
CIMT tensors per (image, noise level) plus a JSON manifest describing the
seeded train/val/test split.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .adc import SarAdcConfig
from .device import DeviceConfig, LayerGeometry, map_weights, quantize_weights
from .pipeline import NoiseConfig, PowerFeatureMatrices, inject_noise
from .tensorio import write_tensor

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
SPLIT_RULE = "floor-then-remainder-in-order:train,val,test"
IMAGE_EXTENSIONS = {".png", ".tif", ".tiff"}


class ConfigError(ValueError):
    """Invalid pipeline configuration or manifest parameters."""


def _decode_grayscale(img, size: tuple[int, int]) -> np.ndarray:
    """Grayscale-convert (channel average), bilinear-resize, floor-quantize."""
    from PIL import Image

    target = (size[1], size[0])  # PIL uses (width, height)
    if img.mode == "L":
        if img.size == target:
            return np.asarray(img, dtype=np.uint8)  # byte-identical passthrough
        gray = np.asarray(img, dtype=np.float32)
    else:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32)
        gray = rgb.mean(axis=2)
    resized = Image.fromarray(gray, mode="F").resize(target, Image.BILINEAR)
    return np.clip(np.floor(np.asarray(resized)), 0, 255).astype(np.uint8)


def ingest_images(directory, size: tuple[int, int] = (256, 256)) -> list[tuple[str, np.ndarray]]:
    """Load every PNG/TIFF under `directory` as an 8-bit grayscale matrix.

    Files are processed in lexicographic order; undecodable files are
    skipped with a warning. An empty result is an error.
    """
    from PIL import Image

    root = Path(directory)
    if not root.is_dir():
        raise ValueError(f"{directory} is not a directory")
    out = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTENSIONS or not path.is_file():
            continue
        try:
            with Image.open(path) as img:
                out.append((path.stem, _decode_grayscale(img, size)))
        except Exception as exc:  # undecodable file: skip, keep going
            log.warning("skipping %s: %s", path, exc)
    if not out:
        raise ValueError(f"no decodable images in {directory}")
    return out


def split_assignments(n: int, ratios, seed: int) -> list[str]:
    """Seeded random partition into train/val/test.

    Counts are floor(n * ratio) with the remainder handed out in split
    order; the same seed always reproduces the same assignment.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    counts = [int(np.floor(n * r)) for r in ratios]
    for i in range(n - sum(counts)):
        counts[i % 3] += 1
    perm = np.random.default_rng(seed).permutation(n)
    tags = [""] * n
    pos = 0
    for tag, cnt in zip(SPLITS, counts):
        for idx in perm[pos:pos + cnt]:
            tags[idx] = tag
        pos += cnt
    return tags


@dataclass(frozen=True)
class AttackSample:
    """One (feature matrices, ground truth) pair of the attack dataset."""

    id: str
    array_pf: str
    adc_pf: str
    ground_truth: str
    noise_level: float
    split: str


def export_pairs(pairs, out_dir, ratios=(0.8, 0.1, 0.1), seed: int = 0,
                 noise_levels=(0.0,)) -> dict:
    """Write per-sample tensors plus a manifest under `out_dir`.

    `pairs` is a sequence of (name, PowerFeatureMatrices, ground-truth u8
    image). The split is assigned per image so no image leaks across splits
    through its noisy variants; noise draws are seeded per (image, level).
    """
    out = Path(out_dir)
    tensor_dir = out / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)
    pairs = list(pairs)
    tags = split_assignments(len(pairs), ratios, seed)

    samples = []
    for idx, (name, pf, image) in enumerate(pairs):
        if not isinstance(pf, PowerFeatureMatrices):
            raise TypeError(f"pair {name}: expected PowerFeatureMatrices")
        gt_rel = f"tensors/{name}_gt.cimt"
        write_tensor(out / gt_rel, np.asarray(image, dtype=np.uint8))
        for lidx, level in enumerate(noise_levels):
            child_seed = int(np.random.SeedSequence([seed, idx, lidx]).generate_state(1)[0])
            noisy = inject_noise(pf, NoiseConfig(level=level, seed=child_seed))
            tag = f"{name}_n{int(round(level * 100)):03d}"
            a_rel, d_rel = f"tensors/{tag}_array.cimt", f"tensors/{tag}_adc.cimt"
            write_tensor(out / a_rel, noisy.array_pf.astype(np.float32))
            write_tensor(out / d_rel, noisy.adc_pf.astype(np.float32))
            samples.append(AttackSample(tag, a_rel, d_rel, gt_rel, level, tags[idx]))

    manifest = {
        "version": 1,
        "seed": seed,
        "ratios": list(ratios),
        "noise_levels": [float(v) for v in noise_levels],
        "split_rule": SPLIT_RULE,
        "samples": [asdict(s) for s in samples],
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


def load_manifest(path) -> dict:
    with open(path) as f:
        manifest = json.load(f)
    for key in ("seed", "ratios", "samples"):
        if key not in manifest:
            raise ConfigError(f"manifest missing {key!r}")
    return manifest


@dataclass
class PipelineConfig:
    """Everything one run needs; serialized next to outputs for provenance."""

    device: DeviceConfig = field(default_factory=DeviceConfig)
    adc: SarAdcConfig = field(default_factory=SarAdcConfig)
    layer: LayerGeometry = field(default_factory=LayerGeometry)
    noise_levels: list = field(default_factory=lambda: [0.05, 0.10, 0.15, 0.20])
    split_ratios: tuple = (0.8, 0.1, 0.1)
    image_size: tuple = (256, 256)
    seed: int = 0
    workers: int = 8
    weights: dict = field(default_factory=lambda: {"kind": "synthetic"})

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if any(l < 0 for l in self.noise_levels):
            raise ConfigError("noise levels must be >= 0")
        if len(self.image_size) != 2 or any(s < 1 for s in self.image_size):
            raise ConfigError(f"bad image_size {self.image_size}")
        kind = self.weights.get("kind")
        if kind not in ("synthetic", "file"):
            raise ConfigError(f"weights.kind must be synthetic or file, got {kind!r}")
        if kind == "file" and not self.weights.get("path"):
            raise ConfigError("weights.kind=file needs weights.path")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {"device", "adc", "layer", "noise_levels", "split_ratios",
                 "image_size", "seed", "workers", "weights"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            if "device" in raw:
                kwargs["device"] = DeviceConfig(**raw["device"])
            if "adc" in raw:
                kwargs["adc"] = SarAdcConfig(**raw["adc"])
            if "layer" in raw:
                kwargs["layer"] = LayerGeometry(**raw["layer"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for key in ("noise_levels", "seed", "workers", "weights"):
            if key in raw:
                kwargs[key] = raw[key]
        if "split_ratios" in raw:
            kwargs["split_ratios"] = tuple(raw["split_ratios"])
        if "image_size" in raw:
            kwargs["image_size"] = tuple(raw["image_size"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "device": asdict(self.device),
            "adc": asdict(self.adc),
            "layer": asdict(self.layer),
            "noise_levels": list(self.noise_levels),
            "split_ratios": list(self.split_ratios),
            "image_size": list(self.image_size),
            "seed": self.seed,
            "workers": self.workers,
            "weights": dict(self.weights),
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)

    def build_weights(self) -> tuple[np.ndarray, float]:
        """Quantized first-layer weights: seeded Gaussian or a tensor file."""
        geom = self.layer
        if self.weights["kind"] == "synthetic":
            rng = np.random.default_rng(self.seed)
            w = rng.normal(0.0, 1.0, (geom.out_channels, geom.in_channels,
                                      geom.kernel, geom.kernel))
        else:
            from .tensorio import read_tensor
            w = read_tensor(self.weights["path"]).astype(np.float64)
        return quantize_weights(w)

    def build_tiles(self):
        q, _ = self.build_weights()
        return map_weights(q, self.layer, self.device)
