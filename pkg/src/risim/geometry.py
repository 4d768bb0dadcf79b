"""
Coordinate frames and rig geometry.

Everything lives in a single world frame centred on the RIS: the surface
occupies the YZ-plane, +X is the surface normal (pointing into the scene)
and +Z is vertical. Spherical coordinates use azimuth ``phi`` in the
XY-plane (signed, from +X towards +Y) and zenith ``theta`` measured from +Z,
so a point straight in front of the RIS has ``theta = 90``. Angles cross the
API in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "CartesianPoint",
    "SphericalPoint",
    "RisArray",
    "Scatterer",
    "Scene",
    "cart_to_sph",
    "sph_to_cart",
    "cart_to_sph_array",
    "sph_to_cart_array",
    "build_ris_array",
    "DEFAULT_FEED_POSITION",
]


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, xyz) -> "CartesianPoint":
        x, y, z = (float(v) for v in xyz)
        return cls(x, y, z)

    def distance_to(self, other: "CartesianPoint") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class SphericalPoint:
    """Range in metres, azimuth and zenith in degrees."""

    r: float
    phi: float
    theta: float

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError(f"range must be >= 0, got {self.r}")
        if not 0.0 <= self.theta <= 180.0:
            raise ValueError(f"zenith must lie in [0, 180] degrees, got {self.theta}")


DEFAULT_FEED_POSITION = CartesianPoint(0.6, 0.0, 0.0)


def cart_to_sph(p: CartesianPoint) -> SphericalPoint:
    """
    Convert a Cartesian point to (R, phi, theta).

    The origin maps to ``SphericalPoint(0, 0, 0)`` by convention.
    """
    r = math.sqrt(p.x * p.x + p.y * p.y + p.z * p.z)
    if r == 0.0:
        return SphericalPoint(0.0, 0.0, 0.0)
    phi = math.degrees(math.atan2(p.y, p.x))
    if phi == -180.0:
        phi = 180.0
    theta = math.degrees(math.acos(max(-1.0, min(1.0, p.z / r))))
    return SphericalPoint(r, phi, theta)


def sph_to_cart(p: SphericalPoint) -> CartesianPoint:
    phi = math.radians(p.phi)
    theta = math.radians(p.theta)
    st = math.sin(theta)
    return CartesianPoint(p.r * st * math.cos(phi), p.r * st * math.sin(phi), p.r * math.cos(theta))


def cart_to_sph_array(xyz: np.ndarray) -> np.ndarray:
    """Vectorised `cart_to_sph` over an (..., 3) array; returns (..., 3) of (R, phi, theta)."""
    xyz = np.asarray(xyz, dtype=float)
    r = np.linalg.norm(xyz, axis=-1)
    phi = np.degrees(np.arctan2(xyz[..., 1], xyz[..., 0]))
    phi = np.where(phi == -180.0, 180.0, phi)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.clip(np.where(r > 0, xyz[..., 2] / np.where(r > 0, r, 1.0), 1.0), -1.0, 1.0)
    theta = np.where(r > 0, np.degrees(np.arccos(cos_t)), 0.0)
    phi = np.where(r > 0, phi, 0.0)
    return np.stack([r, phi, theta], axis=-1)


def sph_to_cart_array(r, phi, theta) -> np.ndarray:
    """Vectorised `sph_to_cart`; inputs broadcast, output has a trailing axis of 3."""
    r, phi, theta = np.broadcast_arrays(
        np.asarray(r, float), np.radians(np.asarray(phi, float)), np.radians(np.asarray(theta, float))
    )
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)], axis=-1)


@dataclass(frozen=True, eq=False)
class RisArray:
    """
    Planar RIS element grid in the YZ-plane.

    Attributes
    ----------
    rows, cols : int
        Element counts along z (rows, ``n``) and y (columns, ``m``).
    pitch : float
        Element spacing in metres.
    design_frequency : float
        Frequency (Hz) at which phase profiles are designed.
    element_positions : ndarray, shape (rows, cols, 3)
    """

    rows: int
    cols: int
    pitch: float
    design_frequency: float
    center: CartesianPoint = CartesianPoint(0.0, 0.0, 0.0)
    element_positions: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def positions_flat(self) -> np.ndarray:
        """Element centres as a (rows*cols, 3) array, row-major."""
        return self.element_positions.reshape(-1, 3)


def build_ris_array(
    rows: int, cols: int, pitch: float, design_frequency: float = 28.5e9
) -> RisArray:
    """Centred ``rows x cols`` grid with element (n, m) at y=(m-(M-1)/2)*pitch, z=(n-(N-1)/2)*pitch."""
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"array dimensions must be positive integers, got {rows}x{cols}")
    if not pitch > 0:
        raise ValueError(f"pitch must be positive, got {pitch}")
    if not design_frequency > 0:
        raise ValueError(f"design frequency must be positive, got {design_frequency}")
    rows, cols = int(rows), int(cols)
    z = (np.arange(rows) - (rows - 1) / 2.0) * pitch
    y = (np.arange(cols) - (cols - 1) / 2.0) * pitch
    zz, yy = np.meshgrid(z, y, indexing="ij")
    pos = np.stack([np.zeros_like(yy), yy, zz], axis=-1)
    pos.setflags(write=False)
    return RisArray(rows, cols, float(pitch), float(design_frequency), element_positions=pos)


@dataclass(frozen=True)
class Scatterer:
    position: CartesianPoint
    reflectivity: float = 1.0

    def __post_init__(self):
        if not self.reflectivity >= 0:
            raise ValueError(f"reflectivity must be >= 0, got {self.reflectivity}")


@dataclass(frozen=True)
class Scene:
    """Point scatterers plus the quasi-monostatic antenna pair."""

    scatterers: tuple[Scatterer, ...] = ()
    tx_position: CartesianPoint = DEFAULT_FEED_POSITION
    rx_position: CartesianPoint = DEFAULT_FEED_POSITION

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        for s in self.scatterers:
            if s.position == self.tx_position or s.position == self.rx_position:
                raise ValueError(f"scatterer at {s.position} coincides with an antenna")

    @classmethod
    def from_arrays(
        cls,
        positions: np.ndarray,
        reflectivities: Sequence[float] | np.ndarray | None = None,
        tx: CartesianPoint = DEFAULT_FEED_POSITION,
        rx: CartesianPoint | None = None,
    ) -> "Scene":
        positions = np.atleast_2d(np.asarray(positions, float)) if len(positions) else np.zeros((0, 3))
        if reflectivities is None:
            reflectivities = np.ones(len(positions))
        scat = tuple(
            Scatterer(CartesianPoint.from_array(p), float(a)) for p, a in zip(positions, reflectivities)
        )
        return cls(scat, tx, tx if rx is None else rx)

    @property
    def positions(self) -> np.ndarray:
        if not self.scatterers:
            return np.zeros((0, 3))
        return np.array([s.position.as_array() for s in self.scatterers])

    @property
    def reflectivities(self) -> np.ndarray:
        return np.array([s.reflectivity for s in self.scatterers], dtype=float)

    def __add__(self, other: "Scene") -> "Scene":
        if other.tx_position != self.tx_position or other.rx_position != self.rx_position:
            raise ValueError("cannot merge scenes with different antenna positions")
        return Scene(self.scatterers + other.scatterers, self.tx_position, self.rx_position)
