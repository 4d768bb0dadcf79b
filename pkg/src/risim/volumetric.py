"""
Image formation from beam-indexed range profiles.

Two products come out of a range-domain tensor:

* a 2D azimuth/zenith map holding, per beam, the peak profile magnitude
  inside a range window;
* a 3D voxel image. Every in-window (beam, bin) sample is placed along its
  beam direction, amplitude-compensated for the R^-2 two-way spreading,
  assigned to voxels by nearest neighbour within a cutoff ``delta``, then
  Gaussian-smoothed and thresholded relative to the volume peak.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .detection import RoiSpec
from .geometry import sph_to_cart_array
from .measurement import KIND_VOXEL, MeasurementTensor, _read_preamble, _write_preamble

__all__ = [
    "IntensityMap2D",
    "SampleCloud",
    "GridSpec",
    "VoxelGrid",
    "ImagingParams",
    "Component",
    "project_2d",
    "compensate",
    "samples_from_profiles",
    "auto_grid_spec",
    "hemisphere_grid_spec",
    "voxelize",
    "gaussian_kernel_1d",
    "gaussian_filter_3d",
    "threshold",
    "reconstruct",
    "find_components",
    "write_intensity_map",
    "read_intensity_map",
    "write_voxels_sparse",
    "write_voxels_dense",
    "read_voxels_dense",
]

DEFAULT_DELTA = 0.10
DEFAULT_TRUNCATE = 4.0
_NEIGHBOURS = 8
_QUERY_CHUNK = 262144


@dataclass(eq=False)
class IntensityMap2D:
    """``values[j, i]`` is the peak magnitude for ``(phi_axis[i], theta_axis[j])``."""

    phi_axis: np.ndarray
    theta_axis: np.ndarray
    values: np.ndarray
    range_window: tuple[float, float] | None = None

    def peak_direction(self) -> tuple[float, float]:
        j, i = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.phi_axis[i]), float(self.theta_axis[j])


@dataclass(eq=False)
class SampleCloud:
    """In-window range samples placed in space (struct of arrays)."""

    positions: np.ndarray
    magnitudes: np.ndarray
    beam: np.ndarray
    bin: np.ndarray
    ranges: np.ndarray

    def __len__(self) -> int:
        return len(self.magnitudes)

    @classmethod
    def empty(cls) -> "SampleCloud":
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, int), np.zeros(0, int), np.zeros(0))


@dataclass(frozen=True)
class GridSpec:
    """
    Voxel lattice. ``origin`` is the centre of voxel (0, 0, 0); voxel
    (i, j, k) is centred at ``origin + (i, j, k) * voxel_size``.
    """

    origin: tuple[float, float, float]
    voxel_size: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError(f"voxel size must be positive, got {self.voxel_size}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(o + np.arange(n) * self.voxel_size for o, n in zip(self.origin, self.dims))

    def centers(self) -> np.ndarray:
        """(nx*ny*nz, 3) voxel centres in C order."""
        ax, ay, az = self.axes()
        g = np.meshgrid(ax, ay, az, indexing="ij")
        return np.stack([c.ravel() for c in g], axis=-1)


@dataclass(eq=False)
class VoxelGrid:
    spec: GridSpec
    values: np.ndarray
    filtered: np.ndarray | None = None
    smoothed: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != self.spec.dims:
            raise ValueError(f"values shape {self.values.shape} != grid dims {self.spec.dims}")
        for other in (self.filtered, self.smoothed):
            if other is not None and other.shape != self.values.shape:
                raise ValueError("filtered grid must share the raw grid dimensions")

    @property
    def voxel_size(self) -> float:
        return self.spec.voxel_size

    def centroid(self, which: str = "filtered") -> np.ndarray:
        """Value-weighted centroid of a layer; NaNs if the layer is empty."""
        vals = self._layer(which)
        total = vals.sum()
        if total <= 0:
            return np.full(3, np.nan)
        idx = np.argwhere(vals > 0)
        w = vals[vals > 0]
        return np.asarray(self.spec.origin) + (idx * w[:, None]).sum(axis=0) / total * self.voxel_size

    def _layer(self, which: str) -> np.ndarray:
        layer = {"raw": self.values, "filtered": self.filtered, "smoothed": self.smoothed}[which]
        if layer is None:
            raise ValueError(f"grid has no {which!r} layer")
        return layer


@dataclass(frozen=True)
class ImagingParams:
    """
    Attributes
    ----------
    voxel_size : float
        Voxel edge ``l`` in metres.
    delta : float
        Nearest-sample cutoff in metres.
    sigma : float
        Gaussian width, in voxels unless ``sigma_in_meters``.
    tau_db : float
        Threshold in dB (amplitude) relative to the smoothed peak.
    """

    voxel_size: float = 0.02
    delta: float = DEFAULT_DELTA
    sigma: float = 2.0
    tau_db: float = -20.0
    sigma_in_meters: bool = False
    compensate: bool = True
    r_ref: float = 1.0
    grid_pad: float = 5.0
    truncate: float = DEFAULT_TRUNCATE

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.tau_db > 0:
            raise ValueError("tau_db is relative to the peak and must be <= 0")

    @property
    def sigma_voxels(self) -> float:
        return self.sigma / self.voxel_size if self.sigma_in_meters else self.sigma


def _beam_windows(r_min, r_max, n_beams: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.broadcast_to(np.asarray(r_min, float), (n_beams,))
    hi = np.broadcast_to(np.asarray(r_max, float), (n_beams,))
    if np.any(lo >= hi):
        raise ValueError("range window must satisfy R_min < R_max")
    return lo, hi


def _window_mask(profiles: MeasurementTensor, r_min, r_max) -> np.ndarray:
    lo, hi = _beam_windows(r_min, r_max, profiles.n_beams)
    r = profiles.bin_ranges
    return (r[None, :] >= lo[:, None]) & (r[None, :] <= hi[:, None])


def _require_range(profiles: MeasurementTensor) -> None:
    if profiles.domain != "range":
        raise ValueError("expected range-domain profiles; run process_tensor first")


def _axis_values(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keyed = np.round(values, 9)
    axis, inverse = np.unique(keyed, return_inverse=True)
    return axis, inverse


def project_2d(profiles: MeasurementTensor, r_min, r_max) -> IntensityMap2D:
    """
    Peak |s| inside [r_min, r_max] for every beam.

    ``r_min``/``r_max`` may be scalars or per-beam arrays. Grid positions
    with no beam (e.g. merged ROIs) are 0.
    """
    _require_range(profiles)
    if profiles.n_beams == 0:
        return IntensityMap2D(np.zeros(0), np.zeros(0), np.zeros((0, 0)), None)
    mask = _window_mask(profiles, r_min, r_max)
    if not np.all(mask.any(axis=1)):
        raise ValueError("range window contains no bins for at least one beam")
    peak = np.where(mask, np.abs(profiles.data), 0.0).max(axis=1)
    phi_axis, pi = _axis_values(profiles.beams[:, 0])
    theta_axis, ti = _axis_values(profiles.beams[:, 1])
    values = np.zeros((len(theta_axis), len(phi_axis)))
    np.maximum.at(values, (ti, pi), peak)
    window = (float(np.min(r_min)), float(np.max(r_max)))
    return IntensityMap2D(phi_axis, theta_axis, values, window)


def compensate(magnitude, r, r_ref: float = 1.0):
    """Amplitude scaling by ``(r / r_ref)^2``, i.e. R^4 in power."""
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise ValueError("compensation needs strictly positive ranges")
    out = np.asarray(magnitude, float) * (r / r_ref) ** 2
    return float(out) if out.ndim == 0 else out


def _roi_windows(rois, n_beams: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(rois, RoiSpec):
        rois = [rois]
    counts = [r.n_beams for r in rois]
    if sum(counts) != n_beams:
        raise ValueError(f"ROIs describe {sum(counts)} beams but profiles hold {n_beams}")
    lo = np.concatenate([np.full(c, r.range_window[0]) for c, r in zip(counts, rois)])
    hi = np.concatenate([np.full(c, r.range_window[1]) for c, r in zip(counts, rois)])
    return lo, hi


def samples_from_profiles(
    profiles: MeasurementTensor,
    rois: RoiSpec | Sequence[RoiSpec],
    compensation: bool = True,
    r_ref: float = 1.0,
) -> SampleCloud:
    """
    Every in-window (beam, bin) becomes a point along the beam direction.

    Samples are ordered beam-major then by bin, which is also the
    nearest-neighbour tie-break order. Bins at R <= 0 are skipped.
    """
    _require_range(profiles)
    if profiles.n_beams == 0:
        return SampleCloud.empty()
    lo, hi = _roi_windows(rois, profiles.n_beams)
    mask = _window_mask(profiles, lo, hi) & (profiles.bin_ranges > 0)[None, :]
    beam, bins = np.nonzero(mask)
    r = profiles.bin_ranges[bins]
    mag = np.abs(profiles.data[beam, bins])
    if compensation:
        mag = compensate(mag, r, r_ref)
    pos = sph_to_cart_array(r, profiles.beams[beam, 0], profiles.beams[beam, 1])
    return SampleCloud(pos.reshape(-1, 3), np.asarray(mag, float), beam, bins, r)


def auto_grid_spec(samples: SampleCloud, voxel_size: float, pad_voxels: float = 5.0) -> GridSpec:
    """Bounding box of the samples grown by ``pad_voxels * voxel_size`` on every side."""
    if len(samples) == 0:
        raise ValueError("cannot size a grid from zero samples")
    pad = pad_voxels * voxel_size
    lo = samples.positions.min(axis=0) - pad
    hi = samples.positions.max(axis=0) + pad
    dims = np.floor((hi - lo) / voxel_size + 1e-9).astype(int) + 1
    return GridSpec(tuple(lo), voxel_size, tuple(dims))


def hemisphere_grid_spec(r_max: float, voxel_size: float) -> GridSpec:
    """Box enclosing the half-space x >= 0 out to ``r_max``."""
    n_half = int(math.ceil(r_max / voxel_size))
    return GridSpec((0.0, -n_half * voxel_size, -n_half * voxel_size), voxel_size,
                    (n_half + 1, 2 * n_half + 1, 2 * n_half + 1))


def _nearest(tree: cKDTree, pts: np.ndarray, centers: np.ndarray, delta: float) -> np.ndarray:
    """Index of the nearest sample per centre (lowest index on ties), -1 beyond delta."""
    k = min(_NEIGHBOURS, len(pts))
    bound = delta * (1.0 + 1e-6) + 1e-12
    _, cand = tree.query(centers, k=k, distance_upper_bound=bound)
    cand = cand.reshape(len(centers), k)
    valid = cand < len(pts)
    safe = np.where(valid, cand, 0)
    diff = centers[:, None, :] - pts[safe]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    dist = np.where(valid, dist, np.inf)
    best = dist.min(axis=1)
    tied = dist == best[:, None]
    choice = np.where(tied, safe, np.iinfo(np.int64).max).min(axis=1)
    return np.where(np.isfinite(best) & (best <= delta), choice, -1)


def voxelize(samples: SampleCloud, spec: GridSpec, delta: float = DEFAULT_DELTA) -> VoxelGrid:
    """
    Nearest-neighbour assignment of compensated magnitudes to voxel centres.

    A voxel whose nearest sample is farther than ``delta`` gets 0. Equidistant
    samples resolve to the lowest sample index (lowest beam, then bin).
    """
    if len(samples) == 0:
        raise ValueError("no samples to voxelize")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if min(spec.dims) < 1:
        raise ValueError(f"degenerate grid dims {spec.dims}")
    pts = np.ascontiguousarray(samples.positions)
    tree = cKDTree(pts)
    centers = spec.centers()
    out = np.zeros(len(centers))
    for start in range(0, len(centers), _QUERY_CHUNK):
        c = centers[start:start + _QUERY_CHUNK]
        idx = _nearest(tree, pts, c, delta)
        hit = idx >= 0
        out[start:start + _QUERY_CHUNK][hit] = samples.magnitudes[idx[hit]]
    return VoxelGrid(spec, out.reshape(spec.dims))


def gaussian_kernel_1d(sigma: float, truncate: float = DEFAULT_TRUNCATE) -> np.ndarray:
    """Sampled Gaussian on integer offsets |x| <= int(truncate*sigma + 0.5), unit sum."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_filter_3d(values: np.ndarray, sigma: float, truncate: float = DEFAULT_TRUNCATE) -> np.ndarray:
    """Separable Gaussian smoothing (sigma in voxels) with zero padding outside the grid."""
    kernel = gaussian_kernel_1d(sigma, truncate)
    out = np.asarray(values, float)
    for axis in range(out.ndim):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="constant", cval=0.0)
    return out


def threshold(values: np.ndarray, tau_db: float) -> np.ndarray:
    """Keep voxels at or above ``max * 10^(tau_db/20)``; everything else becomes 0."""
    values = np.asarray(values, float)
    if values.size == 0:
        return values.copy()
    peak = values.max()
    if peak <= 0:
        return np.zeros_like(values)
    level = 0.0 if tau_db == -math.inf else peak * 10.0 ** (tau_db / 20.0)
    return np.where(values >= level, values, 0.0)


def reconstruct(
    profiles: MeasurementTensor,
    rois: RoiSpec | Sequence[RoiSpec],
    params: ImagingParams = ImagingParams(),
    grid: GridSpec | str | None = None,
) -> tuple[IntensityMap2D, VoxelGrid]:
    """
    Full image formation: 2D projection, samples, voxels, smoothing, threshold.

    ``grid`` may be a `GridSpec`, ``"hemisphere"`` or None (sample bounding
    box padded by ``params.grid_pad`` voxels).
    """
    _require_range(profiles)
    if isinstance(rois, RoiSpec):
        rois = [rois]
    if profiles.n_beams == 0:
        empty = GridSpec((0.0, 0.0, 0.0), params.voxel_size, (0, 0, 0))
        z = np.zeros((0, 0, 0))
        return project_2d(profiles, 0.0, 1.0), VoxelGrid(empty, z, z.copy(), z.copy())
    lo, hi = _roi_windows(rois, profiles.n_beams)
    image_2d = project_2d(profiles, lo, hi)
    samples = samples_from_profiles(profiles, rois, params.compensate, params.r_ref)
    if isinstance(grid, GridSpec):
        spec = grid
    elif grid == "hemisphere":
        spec = hemisphere_grid_spec(max(r.range_window[1] for r in rois), params.voxel_size)
    elif grid is None:
        spec = auto_grid_spec(samples, params.voxel_size, params.grid_pad)
    else:
        raise ValueError(f"unknown grid mode {grid!r}")
    vox = voxelize(samples, spec, params.delta)
    vox.smoothed = gaussian_filter_3d(vox.values, params.sigma_voxels, params.truncate)
    vox.filtered = threshold(vox.smoothed, params.tau_db)
    return image_2d, vox


@dataclass(frozen=True)
class Component:
    label: int
    n_voxels: int
    total: float
    peak: float
    centroid: np.ndarray = field(repr=False)


def find_components(grid: VoxelGrid, which: str = "filtered", connectivity: int = 26) -> list[Component]:
    """Connected non-zero regions of a layer, strongest (summed value) first."""
    vals = grid._layer(which)
    structure = {6: 1, 18: 2, 26: 3}[connectivity]
    labels, n = ndimage.label(vals > 0, structure=ndimage.generate_binary_structure(3, structure))
    comps = []
    origin = np.asarray(grid.spec.origin)
    for lab in range(1, n + 1):
        idx = np.argwhere(labels == lab)
        w = vals[labels == lab]
        c = origin + (idx * w[:, None]).sum(axis=0) / w.sum() * grid.voxel_size
        comps.append(Component(lab, len(w), float(w.sum()), float(w.max()), c))
    comps.sort(key=lambda c: -c.total)
    return comps


def write_intensity_map(path: str | PathLike, image: IntensityMap2D) -> None:
    """Whitespace matrix: first row is the phi axis, first column the theta axis (degrees)."""
    with open(path, "w") as fh:
        if image.range_window is not None:
            fh.write(f"# range_window {image.range_window[0]!r} {image.range_window[1]!r}\n")
        fh.write("theta\\phi " + " ".join(repr(float(p)) for p in image.phi_axis) + "\n")
        for t, row in zip(image.theta_axis, image.values):
            fh.write(repr(float(t)) + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_intensity_map(path: str | PathLike) -> IntensityMap2D:
    window = None
    rows = []
    phi = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("# range_window"):
                _, _, a, b = line.split()
                window = (float(a), float(b))
            elif line.startswith("theta\\phi"):
                phi = np.array([float(v) for v in line.split()[1:]])
            elif line.strip() and not line.startswith("#"):
                rows.append([float(v) for v in line.split()])
    data = np.array(rows).reshape(len(rows), -1) if rows else np.zeros((0, 1))
    return IntensityMap2D(phi if phi is not None else np.zeros(0), data[:, 0], data[:, 1:], window)


def write_voxels_sparse(path: str | PathLike, grid: VoxelGrid, which: str = "filtered") -> None:
    """Header with origin / voxel size / dims, then ``x y z value`` per non-zero voxel."""
    vals = grid._layer(which)
    spec = grid.spec
    with open(path, "w") as fh:
        fh.write(f"# layer {which}\n")
        fh.write("# origin {!r} {!r} {!r}\n".format(*spec.origin))
        fh.write(f"# voxel_size {spec.voxel_size!r}\n")
        fh.write("# dims {} {} {}\n".format(*spec.dims))
        idx = np.argwhere(vals > 0)
        xyz = np.asarray(spec.origin) + idx * spec.voxel_size
        for (x, y, z), v in zip(xyz.tolist(), vals[vals > 0].tolist()):
            fh.write(f"{x!r} {y!r} {z!r} {v!r}\n")


_VOXEL_HEADER = struct.Struct("<QQQddddI")


def write_voxels_dense(path: str | PathLike, grid: VoxelGrid) -> None:
    """Dense float64 dump in the shared container (kind 2): raw, then filtered if present."""
    spec = grid.spec
    has_filtered = grid.filtered is not None
    with open(path, "wb") as fh:
        _write_preamble(fh, KIND_VOXEL)
        fh.write(_VOXEL_HEADER.pack(*spec.dims, *spec.origin, spec.voxel_size, int(has_filtered)))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
        if has_filtered:
            fh.write(np.ascontiguousarray(grid.filtered, dtype="<f8").tobytes())


def read_voxels_dense(path: str | PathLike) -> VoxelGrid:
    with open(path, "rb") as fh:
        kind = _read_preamble(fh)
        if kind != KIND_VOXEL:
            raise ValueError(f"container kind {kind} is not a voxel grid")
        nx, ny, nz, ox, oy, oz, l, has_filtered = _VOXEL_HEADER.unpack(fh.read(_VOXEL_HEADER.size))
        n = nx * ny * nz
        raw = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float).reshape(nx, ny, nz)
        filt = None
        if has_filtered:
            filt = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float).reshape(nx, ny, nz)
    return VoxelGrid(GridSpec((ox, oy, oz), l, (nx, ny, nz)), raw, filt)
