"""Command-line driver for the simulation and preprocessing pipeline.

Subcommands: simulate, features, noise, export, plot, lut. Every run copies
the exact configuration it used into the output directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .adc import build_energy_lut
from .dataset import ConfigError, PipelineConfig, export_pairs, ingest_images
from .pipeline import NoiseConfig, assemble_features, inject_noise, normalize_8bit, \
    PowerFeatureMatrices
from .sim import run_layer
from .tensorio import FormatError, read_tensor, save_png, write_tensor

log = logging.getLogger(__name__)


def _write_provenance(cfg: PipelineConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(out_dir / "config.json")


def _parse_levels(text: str) -> list[float]:
    try:
        levels = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad noise levels {text!r}") from exc
    if not levels or any(l < 0 for l in levels):
        raise ConfigError(f"bad noise levels {text!r}")
    return levels


def _ingest(cfg: PipelineConfig, input_dir: str, limit: int | None):
    images = ingest_images(input_dir, size=tuple(cfg.image_size))
    return images[:limit] if limit else images


def _feature_pairs(cfg: PipelineConfig, images, workers: int):
    tiles = cfg.build_tiles()
    lut = build_energy_lut(cfg.adc)
    for name, img in images:
        grid = run_layer(img, cfg.layer, tiles, cfg.device, cfg.adc, lut, workers=workers)
        yield name, assemble_features(grid), img, grid


def cmd_simulate(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    out = Path(args.out)
    _write_provenance(cfg, out)
    workers = args.workers or cfg.workers
    count = 0
    for name, _, _, grid in _feature_pairs(cfg, _ingest(cfg, args.input, args.limit), workers):
        write_tensor(out / f"{name}_parray.cimt", grid.p_array.astype(np.float32))
        write_tensor(out / f"{name}_eadc.cimt", grid.e_adc.astype(np.float32))
        write_tensor(out / f"{name}_output.cimt", grid.output.astype(np.float32))
        count += 1
    print(f"simulated {count} images -> {out}")
    return 0


def cmd_features(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    out = Path(args.out)
    _write_provenance(cfg, out)
    workers = args.workers or cfg.workers
    count = 0
    for name, pf, img, _ in _feature_pairs(cfg, _ingest(cfg, args.input, args.limit), workers):
        write_tensor(out / f"{name}_array.cimt", pf.array_pf.astype(np.float32))
        write_tensor(out / f"{name}_adc.cimt", pf.adc_pf.astype(np.float32))
        write_tensor(out / f"{name}_gt.cimt", img)
        count += 1
    print(f"extracted features for {count} images -> {out}")
    return 0


def cmd_noise(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    levels = _parse_levels(args.levels) if args.levels else list(cfg.noise_levels)
    src, out = Path(args.input), Path(args.out)
    _write_provenance(cfg, out)
    array_files = sorted(src.glob("*_array.cimt"))
    if not array_files:
        raise ConfigError(f"no *_array.cimt feature tensors under {src}")
    count = 0
    for idx, a_path in enumerate(array_files):
        stem = a_path.name[:-len("_array.cimt")]
        d_path = src / f"{stem}_adc.cimt"
        pf = PowerFeatureMatrices(read_tensor(a_path).astype(np.float64),
                                  read_tensor(d_path).astype(np.float64))
        for lidx, level in enumerate(levels):
            seed = int(np.random.SeedSequence([cfg.seed, idx, lidx]).generate_state(1)[0])
            noisy = inject_noise(pf, NoiseConfig(level=level, seed=seed))
            tag = f"{stem}_n{int(round(level * 100)):03d}"
            write_tensor(out / f"{tag}_array.cimt", noisy.array_pf.astype(np.float32))
            write_tensor(out / f"{tag}_adc.cimt", noisy.adc_pf.astype(np.float32))
            count += 1
    print(f"wrote {count} noisy variants ({len(levels)} levels) -> {out}")
    return 0


def cmd_export(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    out = Path(args.out)
    _write_provenance(cfg, out)
    workers = args.workers or cfg.workers
    levels = _parse_levels(args.levels) if args.levels else list(cfg.noise_levels)
    pairs = [(name, pf, img) for name, pf, img, _ in
             _feature_pairs(cfg, _ingest(cfg, args.input, args.limit), workers)]
    manifest = export_pairs(pairs, out, ratios=cfg.split_ratios, seed=cfg.seed,
                            noise_levels=levels)
    print(f"exported {len(manifest['samples'])} samples -> {out / 'manifest.json'}")
    return 0


def cmd_plot(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    out = Path(args.out)
    _write_provenance(cfg, out)
    did = False
    if args.lut:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        lut = build_energy_lut(cfg.adc)
        lut.to_csv(out / "adc_energy_lut.csv")
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(lut.config.num_codes), lut.normalized(), lw=0.8)
        ax.set_xlabel("ADC output code")
        ax.set_ylabel("normalized switching energy")
        ax.set_title(f"{lut.config.resolution}-bit SAR DAC switching energy")
        fig.tight_layout()
        fig.savefig(out / "adc_energy_lut.png", dpi=150)
        plt.close(fig)
        did = True
    if args.features:
        base = Path(args.features)
        for kind in ("array", "adc"):
            pf = read_tensor(f"{base}_{kind}.cimt").astype(np.float64)
            img8, _ = normalize_8bit(pf)
            save_png(out / f"{base.name}_{kind}.png", img8)
        did = True
    if not did:
        raise ConfigError("plot: nothing to do (pass --lut and/or --features)")
    print(f"plots written -> {out}")
    return 0


def cmd_lut(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    build_energy_lut(cfg.adc).to_csv(out)
    print(f"energy table -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimleak",
        description="RRAM compute-in-memory power-leakage simulator and attack preprocessing")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        p.add_argument("--config", required=True, help="pipeline config JSON")
        if needs_input:
            p.add_argument("--input", required=True, help="input image directory")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=0, help="override config workers")
        p.add_argument("--limit", type=int, default=0, help="process at most N images")

    p = sub.add_parser("simulate", help="per-image execution record grids")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("features", help="per-image power feature matrices")
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("noise", help="noisy variants of extracted features")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="directory of *_array/_adc.cimt pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--levels", default="", help="comma-separated noise levels")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("export", help="GAN-ready dataset with manifest")
    common(p)
    p.add_argument("--levels", default="", help="comma-separated noise levels")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("plot", help="figure-style PNG/CSV outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lut", action="store_true", help="ADC energy curve PNG + CSV")
    p.add_argument("--features", default="", help="basename of a feature tensor pair")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("lut", help="ADC energy table as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lut)
    return parser


def cli(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
