"""
Near-field focusing phase profiles for a 1-bit RIS.

Each element is given the phase that cancels the spherical-wave path
TX -> element -> focus point, then rounded to one of the two hardware
states {0, pi} by the sign of its cosine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .geometry import CartesianPoint, RisArray, sph_to_cart_array

__all__ = [
    "PhaseProfile",
    "CodebookEntry",
    "Codebook",
    "optimal_phase",
    "quantize_1bit",
    "make_profile",
    "build_codebook",
    "concatenate_codebooks",
    "array_factor",
    "write_codebook",
    "read_codebook",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """
    Continuous and 1-bit phase matrices (rows x cols, radians).

    ``quantized`` holds phases 0.0 or pi, not bits.
    """

    continuous: np.ndarray
    quantized: np.ndarray
    focus_point: CartesianPoint
    wavelength: float

    def phases(self, quantized: bool = True) -> np.ndarray:
        return self.quantized if quantized else self.continuous

    @property
    def bits(self) -> np.ndarray:
        return (self.quantized != 0.0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class CodebookEntry:
    beam_index: int
    phi: float
    theta: float
    focus_r: float
    profile: PhaseProfile


@dataclass(frozen=True, eq=False)
class Codebook:
    entries: tuple[CodebookEntry, ...]
    rows: int
    cols: int

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> CodebookEntry:
        return self.entries[i]

    @property
    def beams(self) -> np.ndarray:
        """(n, 3) array of (phi, theta, focus_R)."""
        if not self.entries:
            return np.zeros((0, 3))
        return np.array([(e.phi, e.theta, e.focus_r) for e in self.entries], dtype=float)

    def phase_stack(self, quantized: bool = True) -> np.ndarray:
        """(n, rows, cols) stack of applied phases."""
        if not self.entries:
            return np.zeros((0, self.rows, self.cols))
        return np.stack([e.profile.phases(quantized) for e in self.entries])


def _element_distances(array: RisArray, point: np.ndarray) -> np.ndarray:
    """Distances from every element to ``point`` (..., 3) -> (..., rows, cols)."""
    point = np.asarray(point, float)
    diff = array.element_positions - point[..., None, None, :]
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def optimal_phase(
    array: RisArray, tx: CartesianPoint, target: CartesianPoint, wavelength: float
) -> np.ndarray:
    """
    Continuous focusing phases in [0, 2pi).

    ``(2pi/lambda) * (|tx - e_nm| + |target - e_nm|) mod 2pi``; applying
    ``exp(+j psi)`` at each element cancels the propagation factor
    ``exp(-j k (r_tx + r_p))`` so all elements add in phase at ``target``.
    """
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    r_p = _element_distances(array, target.as_array())
    if np.any(r_p == 0.0):
        raise ValueError(f"focus point {target} coincides with an RIS element")
    r_tx = _element_distances(array, tx.as_array())
    return _wrap((TWO_PI / wavelength) * (r_tx + r_p))


def _wrap(psi: np.ndarray) -> np.ndarray:
    psi = np.mod(psi, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    return np.where(psi >= TWO_PI, 0.0, psi)


def quantize_1bit(continuous: np.ndarray) -> np.ndarray:
    """0 where cos(psi) >= 0, pi otherwise."""
    continuous = np.asarray(continuous, float)
    return np.where(np.cos(continuous) >= 0.0, 0.0, math.pi)


def make_profile(
    array: RisArray, tx: CartesianPoint, target: CartesianPoint, wavelength: float
) -> PhaseProfile:
    cont = optimal_phase(array, tx, target, wavelength)
    return PhaseProfile(cont, quantize_1bit(cont), target, float(wavelength))


def build_codebook(
    array: RisArray,
    tx: CartesianPoint,
    roi_grid: Sequence[tuple[float, float]] | np.ndarray,
    focus_r: float,
    wavelength: float,
) -> Codebook:
    """One focused 1-bit profile per (phi, theta) pair, all at range ``focus_r``."""
    grid = np.asarray(roi_grid, dtype=float).reshape(-1, 2)
    if len(grid) == 0:
        raise ValueError("ROI grid is empty")
    if not focus_r > 0:
        raise ValueError(f"focus range must be positive, got {focus_r}")
    points = sph_to_cart_array(focus_r, grid[:, 0], grid[:, 1])
    entries = []
    for i, ((phi, theta), p) in enumerate(zip(grid, points)):
        prof = make_profile(array, tx, CartesianPoint.from_array(p), wavelength)
        entries.append(CodebookEntry(i, float(phi), float(theta), float(focus_r), prof))
    return Codebook(tuple(entries), array.rows, array.cols)


def concatenate_codebooks(books: Iterable[Codebook]) -> Codebook:
    """Chain several codebooks, renumbering beams sequentially."""
    books = list(books)
    if not books:
        raise ValueError("nothing to concatenate")
    entries = []
    for book in books:
        for e in book:
            entries.append(CodebookEntry(len(entries), e.phi, e.theta, e.focus_r, e.profile))
    return Codebook(tuple(entries), books[0].rows, books[0].cols)


def array_factor(
    profile: PhaseProfile | np.ndarray,
    array: RisArray,
    tx: CartesianPoint,
    eval_point: CartesianPoint,
    wavelength: float,
    quantized: bool = True,
) -> complex:
    """
    Coherent element sum at ``eval_point``.

    ``sum exp(j applied) * exp(-j k (r_tx + r_eval))``. ``profile`` may also be
    a bare phase matrix.
    """
    phases = profile.phases(quantized) if isinstance(profile, PhaseProfile) else np.asarray(profile)
    k = TWO_PI / wavelength
    path = _element_distances(array, tx.as_array()) + _element_distances(array, eval_point.as_array())
    return complex(np.sum(np.exp(1j * (phases - k * path))))


def write_codebook(path: str | PathLike, book: Codebook) -> None:
    """
    Plain-text export for an RIS controller.

    One ``beam`` header line per entry followed by ``rows`` lines of
    ``cols`` characters, '0' for phase 0 and '1' for phase pi.
    """
    lines = ["# risim codebook v1", f"rows {book.rows}", f"cols {book.cols}", f"entries {len(book)}"]
    for e in book:
        lines.append(f"beam {e.beam_index} {e.phi!r} {e.theta!r} {e.focus_r!r}")
        for row in e.profile.bits:
            lines.append("".join("1" if b else "0" for b in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_codebook(path: str | PathLike) -> list[tuple[int, float, float, float, np.ndarray]]:
    """Parse `write_codebook` output into ``(beam, phi, theta, focus_R, bits)`` tuples."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = {}
    for ln in lines[:3]:
        key, val = ln.split()
        header[key] = int(val)
    rows, cols, count = header["rows"], header["cols"], header["entries"]
    out = []
    pos = 3
    for _ in range(count):
        tag, idx, phi, theta, rr = lines[pos].split()
        if tag != "beam":
            raise ValueError(f"expected beam header, got {lines[pos]!r}")
        bits = np.array([[c == "1" for c in lines[pos + 1 + r]] for r in range(rows)], dtype=np.uint8)
        if bits.shape != (rows, cols):
            raise ValueError(f"beam {idx}: bit matrix shape {bits.shape} != {(rows, cols)}")
        out.append((int(idx), float(phi), float(theta), float(rr), bits))
        pos += 1 + rows
    return out
