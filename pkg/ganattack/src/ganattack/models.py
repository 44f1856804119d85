"""pix2pix model pair: U-Net generator and PatchGAN discriminator."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
import torch.nn as nn

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorSpec:
    """Encoder-decoder with mirror skip connections.

    The two power feature matrices enter channel-concatenated; the output is
    the reconstructed single-channel image. Depth and width are knobs so the
    same architecture scales from 256x256 runs down to small-image CPU runs.
    """

    in_channels: int = 2
    out_channels: int = 1
    image_size: int = 256
    depth: int = 8
    base_width: int = 64

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.image_size % (2 ** self.depth) != 0:
            raise ValueError(f"image_size {self.image_size} is not divisible "
                             f"by 2^{self.depth}")

    def widths(self) -> list[int]:
        return [min(self.base_width * (2 ** i), self.base_width * 8)
                for i in range(self.depth)]


@dataclass(frozen=True)
class DiscriminatorSpec:
    """PatchGAN over (feature matrices, image) channel stacks.

    Receptive field is fixed by n_layers; three stride-2 stages give the
    70x70 patch. The score-map size then follows from the input size.
    """

    in_channels: int = 3
    n_layers: int = 3
    base_width: int = 64

    def __post_init__(self) -> None:
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(kernel, stride) per conv, input to output order."""
        return [(4, 2)] * self.n_layers + [(4, 1), (4, 1)]


def receptive_field(layer_shapes) -> int:
    """Analytic receptive field of stacked convolutions."""
    rf, jump = 1, 1
    for kernel, stride in layer_shapes:
        rf += (kernel - 1) * jump
        jump *= stride
    return rf


class _Down(nn.Module):
    def __init__(self, cin, cout, norm=True):
        super().__init__()
        layers = [nn.LeakyReLU(0.2, inplace=True),
                  nn.Conv2d(cin, cout, 4, 2, 1, bias=not norm)]
        if norm:
            layers.append(nn.BatchNorm2d(cout))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class _Up(nn.Module):
    def __init__(self, cin, cout, dropout=False):
        super().__init__()
        layers = [nn.ReLU(inplace=True),
                  nn.ConvTranspose2d(cin, cout, 4, 2, 1, bias=False),
                  nn.BatchNorm2d(cout)]
        if dropout:
            layers.append(nn.Dropout(0.5))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class UNetGenerator(nn.Module):
    """U-Net: stride-2 conv encoder, transposed-conv decoder, skip cats."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        w = spec.widths()
        self.head = nn.Conv2d(spec.in_channels, w[0], 4, 2, 1)
        downs = []
        for i in range(1, spec.depth):
            # innermost stage runs at 1x1 when fully downsampled: no norm there
            innermost = i == spec.depth - 1 and spec.image_size == 2 ** spec.depth
            downs.append(_Down(w[i - 1], w[i], norm=not innermost))
        self.downs = nn.ModuleList(downs)
        ups = []
        for i in range(spec.depth - 1, 0, -1):
            cin = w[i] if i == spec.depth - 1 else w[i] * 2
            ups.append(_Up(cin, w[i - 1], dropout=i >= spec.depth - 3 and spec.depth > 4))
        self.ups = nn.ModuleList(ups)
        self.tail = nn.Sequential(
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(w[0] * 2 if spec.depth > 1 else w[0],
                               spec.out_channels, 4, 2, 1),
            nn.Tanh(),
        )

    def forward(self, x):
        if x.shape[-1] != self.spec.image_size or x.shape[-2] != self.spec.image_size:
            raise ValueError(f"expected {self.spec.image_size}-pixel inputs, "
                             f"got {tuple(x.shape)}")
        skips = [self.head(x)]
        for down in self.downs:
            skips.append(down(skips[-1]))
        y = skips.pop()
        for up in self.ups:
            y = up(y)
            y = torch.cat([y, skips.pop()], dim=1)
        return self.tail(y)


class PatchDiscriminator(nn.Module):
    """Patch-level real/fake scores; the mean of the map is the decision."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        layers = [nn.Conv2d(spec.in_channels, w, 4, 2, 1),
                  nn.LeakyReLU(0.2, inplace=True)]
        cin = w
        for i in range(1, spec.n_layers):
            cout = min(w * (2 ** i), w * 8)
            layers += [nn.Conv2d(cin, cout, 4, 2, 1, bias=False),
                       nn.BatchNorm2d(cout),
                       nn.LeakyReLU(0.2, inplace=True)]
            cin = cout
        cout = min(w * (2 ** spec.n_layers), w * 8)
        layers += [nn.Conv2d(cin, cout, 4, 1, 1, bias=False),
                   nn.BatchNorm2d(cout),
                   nn.LeakyReLU(0.2, inplace=True),
                   nn.Conv2d(cout, 1, 4, 1, 1)]
        self.body = nn.Sequential(*layers)

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.spec.layer_shapes())

    def forward(self, x):
        return self.body(x)


def _init_weights(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.normal_(module.weight, 0.0, 0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.normal_(module.weight, 1.0, 0.02)
        nn.init.zeros_(module.bias)


def build_models(gspec: GeneratorSpec, dspec: DiscriminatorSpec):
    """Instantiate and initialize the pair; logs parameter counts."""
    if dspec.in_channels != gspec.in_channels + gspec.out_channels:
        raise ValueError("discriminator must see the conditioned pair: "
                         f"{gspec.in_channels}+{gspec.out_channels} channels")
    gen = UNetGenerator(gspec)
    disc = PatchDiscriminator(dspec)
    gen.apply(_init_weights)
    disc.apply(_init_weights)
    log.info("generator: %.2fM params, discriminator: %.2fM params (rf=%d)",
             sum(p.numel() for p in gen.parameters()) / 1e6,
             sum(p.numel() for p in disc.parameters()) / 1e6,
             disc.receptive_field)
    return gen, disc
