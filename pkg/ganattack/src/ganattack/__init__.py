"""ganattack: pix2pix conditional GAN reconstructing private inputs from
exported power feature matrices."""

from .cimt import load_manifest, manifest_samples, read_tensor, write_tensor
from .data import PairDataset
from .evaluate import evaluate_pairs, psnr, ssim, write_report
from .models import (DiscriminatorSpec, GeneratorSpec, PatchDiscriminator,
                     UNetGenerator, build_models, receptive_field)
from .reconstruct import load_generator, reconstruct_split, reconstruct_tensor
from .train import TrainConfig, train

__version__ = "0.1.0"
