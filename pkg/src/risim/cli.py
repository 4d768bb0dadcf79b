"""
Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 backend error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .backends import BackendError, ReplayBackend, SimulatedBackend
from .codebook import write_codebook
from .config import ConfigError, ScenarioConfig, load_scenario
from .detection import read_detections, write_detections
from .measurement import read_tensor, write_tensor
from .pipeline import beam_report, codebook_for, rois_for, run_pipeline, write_beam_report
from .sfcw import process_tensor
from .simulate import feed_offset, simulate_tensor
from .volumetric import reconstruct, write_intensity_map, write_voxels_dense, write_voxels_sparse

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3

log = logging.getLogger("risim")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="scenario1_desk", help="scenario file or bundled name (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out-dir", type=Path, default=Path("out"), help="artifact directory (default: %(default)s)")
    p.add_argument("--backend", choices=("sim", "replay"), default="sim")
    p.add_argument("--fft-len", type=int, default=None, help="IFFT length (default: 4x sweep points)")
    p.add_argument("--threads", type=int, default=1, help="simulation worker threads")
    p.add_argument("--tensor", type=Path, help="recorded raw tensor (replay backend, process)")
    p.add_argument("--profiles", type=Path, help="range-profile tensor (reconstruct)")
    p.add_argument("--detections", type=Path, help="recorded radar detections file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risim", description="RIS-assisted SFCW imaging simulator and pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "codebook": "export 1-bit RIS patterns for the detected ROIs",
        "simulate": "simulate the raw S21 tensor for a scenario",
        "process": "turn a raw tensor into range profiles",
        "reconstruct": "form 2D map and voxel grids from range profiles",
        "pipeline": "run detection through reconstruction end to end",
        "beam-report": "continuous vs 1-bit focus gain per beam",
    }
    for name, text in helps.items():
        _common(sub.add_parser(name, help=text, description=text))
    return parser


def _config(args) -> ScenarioConfig:
    cfg = load_scenario(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        cfg = replace(cfg, seed=args.seed)
    if args.fft_len is not None and args.fft_len < cfg.sweep.points:
        raise ConfigError(f"--fft-len {args.fft_len} is shorter than the {cfg.sweep.points}-point sweep")
    if args.threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {args.threads}")
    return cfg


def _need(args, name: str) -> Path:
    path = getattr(args, name)
    if path is None:
        raise ConfigError(f"--{name} is required for '{args.command}'")
    if not path.is_file():
        raise ConfigError(f"--{name}: no such file {path}")
    return path


def _backend(args, cfg: ScenarioConfig):
    if args.backend == "sim":
        return SimulatedBackend.from_config(cfg)
    tensor = read_tensor(_need(args, "tensor"))
    dets = read_detections(_need(args, "detections"))
    return ReplayBackend(tensor, dets)


def _detections(args, cfg):
    if args.detections is not None:
        return read_detections(_need(args, "detections"))
    return SimulatedBackend.from_config(cfg).detect()


def cmd_codebook(args, cfg, out: Path) -> None:
    dets = _detections(args, cfg)
    book = codebook_for(cfg, rois_for(cfg, dets))
    write_detections(out / "detections.txt", dets)
    write_codebook(out / "codebook.txt", book)
    print(f"{len(book)} beams from {len(dets)} detections -> {out / 'codebook.txt'}")


def cmd_simulate(args, cfg, out: Path) -> None:
    dets = _detections(args, cfg)
    book = codebook_for(cfg, rois_for(cfg, dets))
    tensor = simulate_tensor(cfg.build_scene(), cfg.build_array(), book, cfg.sweep, cfg.sim, cfg.seed, args.threads)
    write_detections(out / "detections.txt", dets)
    write_codebook(out / "codebook.txt", book)
    write_tensor(out / "tensor.bin", tensor)
    print(f"{tensor.n_beams} x {cfg.sweep.points} sweep tensor -> {out / 'tensor.bin'}")


def cmd_process(args, cfg, out: Path) -> None:
    tensor = read_tensor(_need(args, "tensor"))
    n_fft = args.fft_len or cfg.processing.fft_len
    profiles = process_tensor(tensor, n_fft, cfg.processing.window, range_offset=feed_offset(cfg.tx, cfg.rx))
    write_tensor(out / "profiles.bin", profiles)
    print(f"{profiles.n_beams} range profiles, {profiles.fft_len} bins -> {out / 'profiles.bin'}")


def cmd_reconstruct(args, cfg, out: Path) -> None:
    profiles = read_tensor(_need(args, "profiles"))
    rois = rois_for(cfg, read_detections(_need(args, "detections")))
    n_expected = sum(r.n_beams for r in rois)
    if n_expected != profiles.n_beams:
        raise ConfigError(f"detections imply {n_expected} beams but the profiles hold {profiles.n_beams}")
    grid = None if cfg.processing.grid == "auto" else cfg.processing.grid
    image_2d, vox = reconstruct(profiles, rois, cfg.imaging, grid)
    write_intensity_map(out / "map2d.txt", image_2d)
    write_voxels_dense(out / "voxels.bin", vox)
    write_voxels_sparse(out / "voxels_raw.txt", vox, "raw")
    write_voxels_sparse(out / "voxels_filtered.txt", vox, "filtered")
    print(f"voxel grid {vox.spec.dims}, {int(np.count_nonzero(vox.filtered))} voxels above threshold -> {out}")


def cmd_pipeline(args, cfg, out: Path) -> None:
    result = run_pipeline(cfg, _backend(args, cfg), out, args.threads, args.fft_len)
    rep = result.report
    print(f"{rep['beams']} beams; stage times (s): " + ", ".join(f"{k} {v:.3f}" for k, v in rep["timing_s"].items()))
    for i, comp in enumerate(rep.get("components", [])[:8]):
        x, y, z = comp["centroid"]
        print(f"component {i}: centroid ({x:.3f}, {y:.3f}, {z:.3f}) m, {comp['voxels']} voxels")
    print(f"artifacts -> {out}")


def cmd_beam_report(args, cfg, out: Path) -> None:
    dets = _detections(args, cfg)
    book = codebook_for(cfg, rois_for(cfg, dets))
    rows = beam_report(book, cfg.build_array(), cfg.tx, cfg.wavelength)
    write_beam_report(out / "beam_report.txt", rows)
    if rows:
        ratios = np.array([r["ratio"] for r in rows])
        print(f"{len(rows)} beams; 1-bit/continuous ratio mean {ratios.mean():.4f} "
              f"min {ratios.min():.4f} max {ratios.max():.4f} (2/pi = {2 / np.pi:.4f})")
    else:
        print("empty codebook")
    print(f"table -> {out / 'beam_report.txt'}")


COMMANDS = {
    "codebook": cmd_codebook,
    "simulate": cmd_simulate,
    "process": cmd_process,
    "reconstruct": cmd_reconstruct,
    "pipeline": cmd_pipeline,
    "beam-report": cmd_beam_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, args.out_dir)
    except ConfigError as exc:
        print(f"risim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"risim: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ValueError, OSError) as exc:
        print(f"risim: input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
