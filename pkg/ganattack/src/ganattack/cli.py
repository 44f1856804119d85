"""Attack-model CLI: train, reconstruct, evaluate."""

from __future__ import annotations

import argparse
import logging
import sys

from .cimt import CimtError
from .data import PairDataset
from .evaluate import evaluate_pairs, write_report
from .models import GeneratorSpec
from .reconstruct import reconstruct_split
from .train import TrainConfig, train

log = logging.getLogger(__name__)


def cmd_train(args) -> int:
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      lambda_l1=args.lambda_l1, seed=args.seed,
                      device=args.device, out_dir=args.out,
                      sample_every=args.sample_every,
                      select_by_val=args.select_by_val)
    gspec = None
    if args.image_size:
        depth = args.depth or min(8, args.image_size.bit_length() - 1)
        gspec = GeneratorSpec(image_size=args.image_size, depth=depth,
                              base_width=args.base_width)
    level = args.noise_level if args.noise_level >= 0 else None
    history = train(args.manifest, cfg, gspec=gspec, noise_level=level)
    print(f"trained {cfg.epochs} epochs -> {args.out} "
          f"(final g_l1 {history['g_l1'][-1]:.4f})")
    return 0


def cmd_reconstruct(args) -> int:
    level = args.noise_level if args.noise_level >= 0 else None
    results = reconstruct_split(args.checkpoint, args.manifest, args.out,
                                split=args.split, noise_level=level,
                                device=args.device)
    print(f"reconstructed {len(results)} samples -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    level = args.noise_level if args.noise_level >= 0 else None
    from .reconstruct import load_generator, reconstruct_tensor, to_uint8

    gen, _ = load_generator(args.checkpoint)
    dataset = PairDataset(args.manifest, split=args.split, noise_level=level)
    entries = []
    for idx in range(len(dataset)):
        features, target, sample_id = dataset[idx]
        recon = to_uint8(reconstruct_tensor(gen, features))
        truth = to_uint8(target[0].numpy())
        entries.append((sample_id, dataset.samples[idx]["noise_level"], recon, truth))
    report = evaluate_pairs(entries)
    write_report(report, args.out)
    for lvl, stats in report["by_noise_level"].items():
        print(f"noise {lvl:.2f}: mean SSIM {stats['mean_ssim']:.4f} "
              f"mean PSNR {stats['mean_psnr']:.2f} dB ({stats['count']} samples)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ganattack",
        description="pix2pix reconstruction of private inputs from power features")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--lambda-l1", type=float, default=100.0)
    p.add_argument("--noise-level", type=float, default=-1.0,
                   help="train on one noise level only (-1: all)")
    p.add_argument("--image-size", type=int, default=0)
    p.add_argument("--depth", type=int, default=0)
    p.add_argument("--base-width", type=int, default=64)
    p.add_argument("--sample-every", type=int, default=1)
    p.add_argument("--select-by-val", action="store_true",
                   help="keep the epoch with the lowest validation L1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="auto")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--noise-level", type=float, default=-1.0)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--noise-level", type=float, default=-1.0)
    p.set_defaults(func=cmd_evaluate)
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CimtError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
