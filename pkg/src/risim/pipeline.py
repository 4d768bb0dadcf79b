"""
Closed-loop run: detect -> ROI -> codebook -> per-beam acquisition ->
range processing -> reconstruction, with every intermediate written to disk.

Artifacts in ``out_dir``::

    detections.txt      radar priors used for the ROIs
    codebook.txt        1-bit patterns, controller format
    tensor.bin          raw S21 sweeps (tensor.partial.bin while incomplete)
    profiles.bin        range profiles
    map2d.txt           2D peak-intensity map
    voxels.bin          dense raw + filtered voxel grids
    voxels_raw.txt      sparse raw voxels
    voxels_filtered.txt sparse filtered voxels
    report.json         parameters, peaks, components, per-stage wall clock

All files except ``report.json`` (which carries timings) are bit-identical
for identical inputs.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .backends import AcquisitionBackend, BackendError, SimulatedBackend
from .codebook import Codebook, array_factor, build_codebook, concatenate_codebooks, write_codebook
from .config import ScenarioConfig
from .detection import RadarDetection, RoiSpec, define_roi, roi_grid, write_detections
from .geometry import CartesianPoint, RisArray
from .measurement import MeasurementTensor, read_tensor, write_tensor
from .sfcw import process_tensor
from .simulate import feed_offset
from .volumetric import (
    IntensityMap2D,
    VoxelGrid,
    find_components,
    reconstruct,
    write_intensity_map,
    write_voxels_dense,
    write_voxels_sparse,
)

__all__ = ["PipelineResult", "run_pipeline", "rois_for", "codebook_for", "beam_report", "write_beam_report",
           "DATA_ARTIFACTS"]

log = logging.getLogger(__name__)

DATA_ARTIFACTS = (
    "detections.txt", "codebook.txt", "tensor.bin", "profiles.bin", "map2d.txt",
    "voxels.bin", "voxels_raw.txt", "voxels_filtered.txt",
)


@dataclass
class PipelineResult:
    detections: list[RadarDetection]
    rois: list[RoiSpec]
    codebook: Codebook
    tensor: MeasurementTensor
    profiles: MeasurementTensor
    image_2d: IntensityMap2D
    voxels: VoxelGrid
    report: dict
    out_dir: Path | None = None
    timings: dict = field(default_factory=dict)


def rois_for(config: ScenarioConfig, detections: list[RadarDetection]) -> list[RoiSpec]:
    r = config.roi
    return [define_roi(d, r.span_phi, r.span_theta, r.step, r.center_theta, r.range_pad) for d in detections]


def codebook_for(config: ScenarioConfig, rois: list[RoiSpec], array: RisArray | None = None) -> Codebook:
    array = array or config.build_array()
    books = [build_codebook(array, config.tx, roi_grid(r), r.focus_r, config.wavelength) for r in rois]
    if not books:
        return Codebook((), array.rows, array.cols)
    return concatenate_codebooks(books)


def _acquire(
    backend: AcquisitionBackend,
    codebook: Codebook,
    sweep,
    partial_path: Path | None,
    threads: int,
) -> MeasurementTensor:
    rows: list[np.ndarray] = []
    if partial_path is not None and partial_path.exists():
        done = read_tensor(partial_path)
        if done.sweep == sweep and np.array_equal(done.beams, codebook.beams[: done.n_beams]):
            rows = list(done.data)
            log.info("resuming acquisition at beam %d", len(rows))
    if isinstance(backend, SimulatedBackend):
        backend.prefetch(codebook, threads, start=len(rows))
    try:
        for entry in codebook.entries[len(rows):]:
            backend.set_pattern(entry.beam_index, entry)
            row = np.asarray(backend.sweep(), dtype=np.complex128)
            if row.shape != (sweep.points,):
                raise BackendError(f"sweep returned {row.shape[0]} points, expected {sweep.points}", entry.beam_index)
            rows.append(row)
    except Exception as exc:
        if partial_path is not None:
            write_tensor(partial_path, _tensor(codebook, rows, sweep))
        if isinstance(exc, BackendError):
            raise
        raise BackendError(str(exc), len(rows)) from exc
    if partial_path is not None and partial_path.exists():
        partial_path.unlink()
    return _tensor(codebook, rows, sweep)


def _tensor(codebook: Codebook, rows: list, sweep) -> MeasurementTensor:
    data = np.array(rows).reshape(len(rows), sweep.points)
    return MeasurementTensor(codebook.beams[: len(rows)], data, sweep, "frequency")


def _component_summary(voxels: VoxelGrid) -> list[dict]:
    if voxels.filtered is None or voxels.filtered.size == 0:
        return []
    return [
        {"voxels": c.n_voxels, "total": c.total, "peak": c.peak, "centroid": [float(v) for v in c.centroid]}
        for c in find_components(voxels)
    ]


def run_pipeline(
    config: ScenarioConfig,
    backend: AcquisitionBackend | None = None,
    out_dir: str | os.PathLike | None = None,
    threads: int = 1,
    fft_len: int | None = None,
) -> PipelineResult:
    """
    Execute the full closed loop against ``backend`` (simulated from
    ``config`` when omitted) and write artifacts to ``out_dir`` if given.

    Backend failures surface as `BackendError` naming the beam; completed
    sweeps are flushed to ``tensor.partial.bin`` and a rerun resumes there.
    """
    backend = backend or SimulatedBackend.from_config(config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    def stage(name):
        timings[name] = time.perf_counter()

    def done(name):
        timings[name] = time.perf_counter() - timings[name]

    stage("detect")
    detections = backend.detect()
    done("detect")
    stage("codebook")
    rois = rois_for(config, detections)
    array = config.build_array()
    codebook = codebook_for(config, rois, array)
    done("codebook")
    if out is not None:
        write_detections(out / "detections.txt", detections)
        write_codebook(out / "codebook.txt", codebook)

    stage("acquire")
    tensor = _acquire(backend, codebook, config.sweep, out / "tensor.partial.bin" if out else None, threads)
    done("acquire")

    stage("process")
    offset = feed_offset(config.tx, config.rx)
    n_fft = fft_len or config.processing.fft_len
    profiles = process_tensor(tensor, n_fft, config.processing.window, range_offset=offset)
    done("process")

    stage("reconstruct")
    grid = None if config.processing.grid == "auto" else config.processing.grid
    image_2d, voxels = reconstruct(profiles, rois, config.imaging, grid)
    done("reconstruct")

    report = _report(config, detections, rois, codebook, profiles, image_2d, voxels, timings)
    if out is not None:
        write_tensor(out / "tensor.bin", tensor)
        write_tensor(out / "profiles.bin", profiles)
        write_intensity_map(out / "map2d.txt", image_2d)
        write_voxels_dense(out / "voxels.bin", voxels)
        write_voxels_sparse(out / "voxels_raw.txt", voxels, "raw")
        write_voxels_sparse(out / "voxels_filtered.txt", voxels, "filtered")
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2)
    return PipelineResult(detections, rois, codebook, tensor, profiles, image_2d, voxels, report, out, timings)


def _report(config, detections, rois, codebook, profiles, image_2d, voxels, timings) -> dict:
    report = {
        "scenario": config.name,
        "seed": config.seed,
        "beams": len(codebook),
        "detections": [asdict(d) for d in detections],
        "rois": [
            {"center_phi": r.center_phi, "center_theta": r.center_theta, "n_phi": r.n_phi,
             "n_theta": r.n_theta, "step": r.step, "focus_r": r.focus_r, "range_window": list(r.range_window)}
            for r in rois
        ],
        "parameters": {
            "sweep": asdict(config.sweep),
            "range_resolution": config.sweep.range_resolution,
            "max_range": config.sweep.max_range,
            "fft_len": profiles.fft_len,
            "bin_spacing": profiles.bin_spacing if profiles.fft_len else None,
            "imaging": asdict(config.imaging),
            "ris": asdict(config.ris),
        },
        "timing_s": {k: round(v, 6) for k, v in timings.items()},
    }
    if len(codebook):
        report["map2d_peak"] = dict(zip(("phi", "theta"), image_2d.peak_direction()))
        if voxels.filtered is not None and voxels.filtered.max() > 0:
            idx = np.unravel_index(int(np.argmax(voxels.filtered)), voxels.filtered.shape)
            report["voxel_peak"] = [float(v) for v in np.asarray(voxels.spec.origin) + np.array(idx) * voxels.voxel_size]
            report["filtered_centroid"] = [float(v) for v in voxels.centroid()]
        report["components"] = _component_summary(voxels)
    return report


def beam_report(
    codebook: Codebook, array: RisArray, tx: CartesianPoint, wavelength: float
) -> list[dict]:
    """Continuous vs 1-bit focus amplitude for every codebook entry."""
    rows = []
    for e in codebook:
        focus = e.profile.focus_point
        cont = abs(array_factor(e.profile, array, tx, focus, wavelength, quantized=False))
        onebit = abs(array_factor(e.profile, array, tx, focus, wavelength, quantized=True))
        rows.append({
            "beam": e.beam_index, "phi": e.phi, "theta": e.theta, "focus_r": e.focus_r,
            "continuous": cont, "one_bit": onebit, "ratio": onebit / cont if cont > 0 else 0.0,
        })
    return rows


def write_beam_report(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("# beam phi_deg theta_deg focus_r_m af_continuous af_1bit ratio\n")
        for r in rows:
            fh.write(
                f"{r['beam']} {r['phi']:.6f} {r['theta']:.6f} {r['focus_r']:.6f} "
                f"{r['continuous']:.6f} {r['one_bit']:.6f} {r['ratio']:.6f}\n"
            )
