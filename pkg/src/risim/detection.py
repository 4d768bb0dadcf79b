"""
Coarse target priors and ROI beam grids.

`mock_fmcw_detect` stands in for the wide-area FMCW radar: it clusters the
scene's scatterers and reports a perturbed (R, phi) per cluster. Recorded
detections from real hardware can be loaded with `read_detections`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import Scene

__all__ = [
    "RadarDetection",
    "RoiSpec",
    "RADAR_AZIMUTH_LIMIT",
    "CLUSTER_RADIUS",
    "mock_fmcw_detect",
    "define_roi",
    "roi_grid",
    "merged_roi_grid",
    "read_detections",
    "write_detections",
]

RADAR_AZIMUTH_LIMIT = 60.0
CLUSTER_RADIUS = 0.3
DEFAULT_CENTER_THETA = 97.0
DEFAULT_RANGE_PAD = 0.5

_EPS = 1e-9


@dataclass(frozen=True)
class RadarDetection:
    r: float
    phi: float
    confidence: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"detection range must be positive, got {self.r}")
        if not abs(self.phi) <= RADAR_AZIMUTH_LIMIT:
            raise ValueError(f"azimuth {self.phi} outside radar coverage of +/-{RADAR_AZIMUTH_LIMIT} deg")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class RoiSpec:
    """Angular scan window around one detection; angles in degrees, ranges in metres."""

    center_phi: float
    center_theta: float
    span_phi: float
    span_theta: float
    step: float
    focus_r: float
    range_window: tuple[float, float]

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"angular step must be positive, got {self.step}")
        if self.span_phi < 0 or self.span_theta < 0:
            raise ValueError("ROI spans must be non-negative")
        r_min, r_max = self.range_window
        if not r_min < r_max:
            raise ValueError(f"range window must satisfy R_min < R_max, got {self.range_window}")
        if not self.focus_r > 0:
            raise ValueError(f"focus range must be positive, got {self.focus_r}")
        object.__setattr__(self, "range_window", (float(r_min), float(r_max)))

    @property
    def half_steps_phi(self) -> int:
        return math.floor(self.span_phi / (2.0 * self.step) + _EPS)

    @property
    def half_steps_theta(self) -> int:
        return math.floor(self.span_theta / (2.0 * self.step) + _EPS)

    @property
    def n_phi(self) -> int:
        return 2 * self.half_steps_phi + 1

    @property
    def n_theta(self) -> int:
        return 2 * self.half_steps_theta + 1

    @property
    def n_beams(self) -> int:
        return self.n_phi * self.n_theta

    @property
    def phi_axis(self) -> np.ndarray:
        k = np.arange(-self.half_steps_phi, self.half_steps_phi + 1)
        return self.center_phi + k * self.step

    @property
    def theta_axis(self) -> np.ndarray:
        k = np.arange(-self.half_steps_theta, self.half_steps_theta + 1)
        return self.center_theta + k * self.step


def _clusters(positions: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage labels: points closer than ``radius`` share a cluster."""
    n = len(positions)
    pairs = cKDTree(positions).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def mock_fmcw_detect(
    scene: Scene,
    noise: tuple[float, float] = (0.0, 0.0),
    seed: int | None = 0,
    cluster_radius: float = CLUSTER_RADIUS,
) -> list[RadarDetection]:
    """
    One detection per scatterer cluster.

    Clusters are merged at their centroid, then range and azimuth are
    perturbed by Gaussian errors with std ``noise = (sigma_R, sigma_phi)``.
    Clusters outside the radar's azimuth coverage are dropped. Output is
    ordered by each cluster's first scatterer in the scene.
    """
    sigma_r, sigma_phi = noise
    if sigma_r < 0 or sigma_phi < 0:
        raise ValueError("noise standard deviations must be non-negative")
    if not scene.scatterers:
        return []
    pos = scene.positions
    refl = scene.reflectivities
    labels = _clusters(pos, cluster_radius)
    order = []
    for lab in labels:
        if lab not in order:
            order.append(lab)
    strength = np.array([refl[labels == lab].sum() for lab in order])
    top = strength.max() if strength.max() > 0 else 1.0
    rng = np.random.default_rng(seed)
    out = []
    for lab, s in zip(order, strength):
        c = pos[labels == lab].mean(axis=0)
        r = float(np.linalg.norm(c))
        phi = math.degrees(math.atan2(c[1], c[0]))
        dr, dphi = rng.standard_normal(2)
        r += sigma_r * dr
        phi += sigma_phi * dphi
        if abs(phi) > RADAR_AZIMUTH_LIMIT or r <= 0:
            continue
        out.append(RadarDetection(float(r), float(phi), float(s / top)))
    return out


def define_roi(
    detection: RadarDetection,
    span_phi: float,
    span_theta: float,
    step: float,
    center_theta: float = DEFAULT_CENTER_THETA,
    range_pad: float = DEFAULT_RANGE_PAD,
) -> RoiSpec:
    """
    ROI centred on a detection's azimuth with its range as focus distance.

    Each axis holds ``center + k * step`` for ``|k| <= span / (2 step)``, so
    the detection's own beam is always on the grid.
    """
    if not range_pad > 0:
        raise ValueError(f"range pad must be positive, got {range_pad}")
    return RoiSpec(
        detection.phi, center_theta, span_phi, span_theta, step, detection.r,
        (max(detection.r - range_pad, 0.0), detection.r + range_pad),
    )


def roi_grid(roi: RoiSpec) -> np.ndarray:
    """(n, 2) array of (phi, theta): theta outer, phi inner, both ascending."""
    tt, pp = np.meshgrid(roi.theta_axis, roi.phi_axis, indexing="ij")
    return np.stack([pp.ravel(), tt.ravel()], axis=-1)


def merged_roi_grid(rois: Sequence[RoiSpec]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate ROI grids; also returns the ROI index of every beam."""
    grids = [roi_grid(r) for r in rois]
    if not grids:
        return np.zeros((0, 2)), np.zeros(0, dtype=int)
    owner = np.concatenate([np.full(len(g), i) for i, g in enumerate(grids)])
    return np.concatenate(grids), owner


def write_detections(path: str | PathLike, detections: Iterable[RadarDetection]) -> None:
    with open(path, "w") as fh:
        fh.write("# R_m phi_deg confidence\n")
        for d in detections:
            fh.write(f"{d.r!r} {d.phi!r} {d.confidence!r}\n")


def read_detections(path: str | PathLike) -> list[RadarDetection]:
    """Whitespace- or comma-separated ``R phi [confidence]`` per line; '#' starts a comment."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].replace(",", " ").strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 'R phi [confidence]', got {line!r}")
            try:
                vals = [float(v) for v in fields]
                out.append(RadarDetection(*vals))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
