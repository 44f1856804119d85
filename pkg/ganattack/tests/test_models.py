import pytest
import torch

from ganattack.models import (DiscriminatorSpec, GeneratorSpec, build_models,
                              receptive_field)


def test_generator_maps_features_to_image():
    torch.manual_seed(0)
    gen, _ = build_models(GeneratorSpec(), DiscriminatorSpec())
    with torch.no_grad():
        out = gen(torch.randn(1, 2, 256, 256))
    assert out.shape == (1, 1, 256, 256)
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_discriminator_score_map():
    torch.manual_seed(0)
    _, disc = build_models(GeneratorSpec(), DiscriminatorSpec())
    with torch.no_grad():
        score = disc(torch.randn(1, 3, 256, 256))
    assert score.shape == (1, 1, 30, 30)


def test_receptive_field_is_seventy():
    spec = DiscriminatorSpec()
    assert receptive_field(spec.layer_shapes()) == 70
    _, disc = build_models(GeneratorSpec(image_size=64, depth=5, base_width=16),
                           DiscriminatorSpec(base_width=16))
    assert disc.receptive_field == 70


def test_receptive_field_varies_with_depth():
    assert receptive_field(DiscriminatorSpec(n_layers=2).layer_shapes()) == 34
    assert receptive_field(DiscriminatorSpec(n_layers=4).layer_shapes()) == 142


def test_seeded_builds_give_identical_outputs():
    x = torch.randn(1, 2, 64, 64)
    outs = []
    for _ in range(2):
        torch.manual_seed(7)
        gen, _ = build_models(GeneratorSpec(image_size=64, depth=5, base_width=16),
                              DiscriminatorSpec(base_width=16))
        gen.eval()
        with torch.no_grad():
            outs.append(gen(x))
    assert torch.equal(outs[0], outs[1])


def test_spatial_mismatch_rejected():
    with pytest.raises(ValueError):
        GeneratorSpec(image_size=100, depth=5)
    gen, _ = build_models(GeneratorSpec(image_size=64, depth=5, base_width=16),
                          DiscriminatorSpec(base_width=16))
    with pytest.raises(ValueError):
        gen(torch.randn(1, 2, 32, 32))


def test_channel_contract_enforced():
    with pytest.raises(ValueError):
        build_models(GeneratorSpec(), DiscriminatorSpec(in_channels=5))


def test_zero_features_produce_finite_output():
    torch.manual_seed(1)
    gen, _ = build_models(GeneratorSpec(image_size=64, depth=5, base_width=16),
                          DiscriminatorSpec(base_width=16))
    gen.eval()
    with torch.no_grad():
        out = gen(torch.zeros(1, 2, 64, 64))
    assert torch.isfinite(out).all()


def test_l1_gradient_matches_finite_differences():
    # spot-check autograd through the generator on a tiny double-precision model
    torch.manual_seed(3)
    gen, _ = build_models(GeneratorSpec(image_size=8, depth=2, base_width=4),
                          DiscriminatorSpec(base_width=4))
    gen.double().eval()
    x = torch.randn(1, 2, 8, 8, dtype=torch.float64)
    target = torch.randn(1, 1, 8, 8, dtype=torch.float64)

    def loss():
        return torch.nn.functional.l1_loss(gen(x), target)

    value = loss()
    value.backward()
    param = gen.head.weight
    grad = param.grad.detach().clone()
    eps = 1e-6
    rng = torch.Generator().manual_seed(0)
    for _ in range(5):
        idx = tuple(torch.randint(0, s, (1,), generator=rng).item() for s in param.shape)
        with torch.no_grad():
            param[idx] += eps
            up = loss().item()
            param[idx] -= 2 * eps
            down = loss().item()
            param[idx] += eps
        fd = (up - down) / (2 * eps)
        if abs(fd) > 1e-8:
            assert grad[idx].item() == pytest.approx(fd, rel=1e-3)
